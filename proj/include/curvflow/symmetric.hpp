#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace curvflow {

/// Binomial coefficient as a double (small arguments only).
inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// Unnormalised elementary symmetric polynomials sigma_0..sigma_n.
inline std::vector<double> elementary_symmetric(std::span<const double> x) {
    std::vector<double> s(x.size() + 1, 0.0);
    s[0] = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t k = i + 1; k >= 1; --k) s[k] += s[k - 1] * x[i];
    return s;
}

/// Normalised elementary symmetric functions E_k = sigma_k / C(n, k), so E_k(1, ..., 1) = 1.
inline std::vector<double> normalized_symmetric(std::span<const double> x) {
    std::vector<double> e = elementary_symmetric(x);
    const int n = static_cast<int>(x.size());
    for (int k = 0; k <= n; ++k) e[static_cast<std::size_t>(k)] /= binomial(n, k);
    return e;
}

/// Pointwise curvature scalars of a principal-curvature tuple.
struct CurvatureScalars {
    double H = 0.0;          // sum of kappa_i
    double norm_A2 = 0.0;    // sum of kappa_i^2
    double traceless2 = 0.0; // (1/n) sum_{i<j} (kappa_i - kappa_j)^2
    double C = 0.0;          // sum of kappa_i^3
};

inline CurvatureScalars curvature_scalars(std::span<const double> kappa) {
    CurvatureScalars c;
    const std::size_t n = kappa.size();
    for (double k : kappa) {
        c.H += k;
        c.norm_A2 += k * k;
        c.C += k * k * k;
    }
    double pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs += (kappa[i] - kappa[j]) * (kappa[i] - kappa[j]);
    c.traceless2 = n > 0 ? pairs / static_cast<double>(n) : 0.0;
    return c;
}

} // namespace curvflow
