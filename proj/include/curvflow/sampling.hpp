#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace curvflow {

/// Unit vector with zero sum, uniform on that sphere (empty direction for n = 1).
inline std::vector<double> random_traceless_unit(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::vector<double> xi(static_cast<std::size_t>(n), 0.0);
    if (n < 2) return xi;
    double norm = 0.0;
    while (norm < 1e-8) {
        double mean = 0.0;
        for (double& x : xi) mean += (x = normal(rng));
        mean /= n;
        norm = 0.0;
        for (double& x : xi) norm += (x -= mean) * x;
        norm = std::sqrt(norm);
    }
    for (double& x : xi) x /= norm;
    return xi;
}

/// kappa = (H/n)(1 + rho xi) with ||A°||^2 / H^2 = ratio.
inline std::vector<double> cone_point(double H, double ratio, const std::vector<double>& xi) {
    const int n = static_cast<int>(xi.size());
    const double rho = n * std::sqrt(std::max(ratio, 0.0));
    std::vector<double> k(xi.size());
    for (std::size_t i = 0; i < xi.size(); ++i) k[i] = H / n * (1.0 + rho * xi[i]);
    return k;
}

/// Random principal-curvature tuple with pinching ratio below `ratio_max`.  Every tenth
/// sample sits on the boundary ratio_max * (1 - 1e-9); H is log-uniform in [0.1, 10]
/// unless `fixed_H` is positive.
inline std::vector<double> sample_cone(int n, double ratio_max, std::mt19937_64& rng, std::size_t index,
                                       double fixed_H = 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double H = fixed_H > 0.0 ? fixed_H : std::exp(std::log(0.1) + unit(rng) * std::log(100.0));
    const std::vector<double> xi = random_traceless_unit(n, rng);
    const double u = index % 10 == 9 ? 1.0 - 1e-9 : unit(rng);
    const double ratio = n < 2 ? 0.0 : ratio_max * u * u;
    return cone_point(H, ratio, xi);
}

/// Haar-random orthogonal n x n matrix.
inline Eigen::MatrixXd random_orthogonal(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    for (int i = 0; i < n; ++i)
        if (qr.matrixQR()(i, i) < 0) q.col(i) *= -1.0;
    return q;
}

} // namespace curvflow
