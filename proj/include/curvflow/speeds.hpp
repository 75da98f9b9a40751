#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "curvflow/convex_body.hpp"
#include "curvflow/error.hpp"
#include "curvflow/sampling.hpp"
#include "curvflow/symmetric.hpp"

namespace curvflow {

using Kappa = std::span<const double>;

/// Default pinching cone 0.9 / (n (n - 1)); the whole positive cone for curves.
inline double default_delta0(int n) {
    return n < 2 ? std::numeric_limits<double>::infinity() : 0.9 / (n * (n - 1.0));
}

/// A symmetric, homogeneous speed f(kappa_1, ..., kappa_n) with its derivatives.
struct SpeedSpec {
    std::string name;
    int dimension = 2;
    double alpha = 2.0;
    int k = 0;
    double delta0 = 0.45;
    std::function<double(Kappa)> f;
    std::function<void(Kappa, std::span<double>)> df;
    std::function<void(Kappa, Eigen::MatrixXd&)> d2f;

    double evaluate(Kappa kappa) const { return f(kappa); }

    void gradient(Kappa kappa, std::span<double> out) const { df(kappa, out); }

    std::vector<double> gradient(Kappa kappa) const {
        std::vector<double> g(kappa.size());
        df(kappa, g);
        return g;
    }

    Eigen::MatrixXd hessian(Kappa kappa) const {
        Eigen::MatrixXd h(static_cast<Eigen::Index>(kappa.size()), static_cast<Eigen::Index>(kappa.size()));
        d2f(kappa, h);
        return h;
    }

    /// c_f = f(1, ..., 1).
    double normalization() const {
        const std::vector<double> ones(static_cast<std::size_t>(dimension), 1.0);
        return f(ones);
    }

    bool in_cone(Kappa kappa) const {
        const CurvatureScalars c = curvature_scalars(kappa);
        return c.H > 0.0 && c.traceless2 < delta0 * c.H * c.H;
    }

    /// Canonical grammar string.
    std::string describe() const {
        std::ostringstream s;
        s.precision(17);
        s << name;
        if (name == "pow_Ek") s << ':' << k;
        s << ",alpha=" << alpha;
        if (std::isfinite(delta0)) s << ",delta0=" << delta0;
        return s.str();
    }
};

namespace detail {

/// sigma_k of kappa with the entries i and j (j < 0: only i) removed.
inline double sigma_without(Kappa kappa, int k, int i, int j = -1) {
    if (k < 0) return 0.0;
    double buf[8];
    std::size_t m = 0;
    for (std::size_t a = 0; a < kappa.size(); ++a)
        if (static_cast<int>(a) != i && static_cast<int>(a) != j) buf[m++] = kappa[a];
    const auto s = elementary_symmetric(std::span<const double>(buf, m));
    return static_cast<std::size_t>(k) < s.size() ? s[static_cast<std::size_t>(k)] : 0.0;
}

inline void check_alpha(double alpha) {
    if (!(alpha > 1.0)) throw PreconditionError("speed degree alpha must exceed 1");
}

inline void check_delta0(int n, double delta0) {
    if (n >= 2 && !(delta0 > 0.0 && delta0 < 1.0 / (n * (n - 1.0))))
        throw PreconditionError("delta0 must lie in (0, 1/(n(n-1)))");
}

} // namespace detail

/// f = H^alpha.
inline SpeedSpec pow_mean(int n, double alpha, double delta0) {
    SpeedSpec s{"pow_mean", n, alpha, 1, delta0, {}, {}, {}};
    s.f = [alpha](Kappa x) {
        double H = 0.0;
        for (double v : x) H += v;
        return std::pow(H, alpha);
    };
    s.df = [alpha](Kappa x, std::span<double> g) {
        double H = 0.0;
        for (double v : x) H += v;
        const double d = alpha * std::pow(H, alpha - 1.0);
        std::fill(g.begin(), g.end(), d);
    };
    s.d2f = [alpha](Kappa x, Eigen::MatrixXd& h) {
        double H = 0.0;
        for (double v : x) H += v;
        h.setConstant(alpha * (alpha - 1.0) * std::pow(H, alpha - 2.0));
    };
    return s;
}

/// f = n^alpha E_k^(alpha / k).
inline SpeedSpec pow_ek(int n, int k, double alpha, double delta0) {
    if (k < 1 || k > n) throw PreconditionError("pow_Ek needs 1 <= k <= n");
    SpeedSpec s{"pow_Ek", n, alpha, k, delta0, {}, {}, {}};
    const double c = std::pow(static_cast<double>(n), alpha);
    const double norm = binomial(n, k);
    const double p = alpha / k;
    s.f = [=](Kappa x) { return c * std::pow(elementary_symmetric(x)[static_cast<std::size_t>(k)] / norm, p); };
    s.df = [=](Kappa x, std::span<double> g) {
        const double E = elementary_symmetric(x)[static_cast<std::size_t>(k)] / norm;
        const double outer = c * p * std::pow(E, p - 1.0);
        for (std::size_t i = 0; i < x.size(); ++i)
            g[i] = outer * detail::sigma_without(x, k - 1, static_cast<int>(i)) / norm;
    };
    s.d2f = [=](Kappa x, Eigen::MatrixXd& h) {
        const double E = elementary_symmetric(x)[static_cast<std::size_t>(k)] / norm;
        const auto m = static_cast<int>(x.size());
        std::vector<double> dE(x.size());
        for (int i = 0; i < m; ++i) dE[static_cast<std::size_t>(i)] = detail::sigma_without(x, k - 1, i) / norm;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                const double ddE = i == j ? 0.0 : detail::sigma_without(x, k - 2, i, j) / norm;
                h(i, j) = c * p
                          * ((p - 1.0) * std::pow(E, p - 2.0) * dE[static_cast<std::size_t>(i)] * dE[static_cast<std::size_t>(j)]
                             + std::pow(E, p - 1.0) * ddE);
            }
    };
    return s;
}

/// f = n^(alpha/2) |A|^alpha.
inline SpeedSpec pow_norm(int n, double alpha, double delta0) {
    SpeedSpec s{"pow_norm", n, alpha, 0, delta0, {}, {}, {}};
    const double c = std::pow(static_cast<double>(n), 0.5 * alpha);
    auto sq = [](Kappa x) {
        double N = 0.0;
        for (double v : x) N += v * v;
        return N;
    };
    s.f = [=](Kappa x) { return c * std::pow(sq(x), 0.5 * alpha); };
    s.df = [=](Kappa x, std::span<double> g) {
        const double d = c * alpha * std::pow(sq(x), 0.5 * alpha - 1.0);
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = d * x[i];
    };
    s.d2f = [=](Kappa x, Eigen::MatrixXd& h) {
        const double N = sq(x);
        const double a = c * alpha * std::pow(N, 0.5 * alpha - 1.0);
        const double b = c * alpha * (alpha - 2.0) * std::pow(N, 0.5 * alpha - 2.0);
        const auto m = static_cast<Eigen::Index>(x.size());
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                h(i, j) = b * x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)] + (i == j ? a : 0.0);
    };
    return s;
}

/// One of the built-in speeds: pow_mean, pow_Ek (needs k), pow_gauss, pow_norm.
inline SpeedSpec builtin(const std::string& name, int n, double alpha, int k = 0,
                         double delta0 = std::numeric_limits<double>::quiet_NaN()) {
    if (n < 1) throw PreconditionError("speed dimension must be positive");
    detail::check_alpha(alpha);
    if (std::isnan(delta0)) delta0 = default_delta0(n);
    detail::check_delta0(n, delta0);
    if (name == "pow_mean") return pow_mean(n, alpha, delta0);
    if (name == "pow_Ek") {
        if (k == 0) throw PreconditionError("pow_Ek needs an index, e.g. pow_Ek:2");
        return pow_ek(n, k, alpha, delta0);
    }
    if (name == "pow_gauss") {
        SpeedSpec s = pow_ek(n, n, alpha, delta0);
        s.name = "pow_gauss";
        return s;
    }
    if (name == "pow_norm") return pow_norm(n, alpha, delta0);
    throw PreconditionError("unknown speed '" + name + "'");
}

/// Grammar `name[:k][,alpha=<real>][,delta0=<real>]`; alpha defaults to 2.
inline SpeedSpec parse_speed(const std::string& text, int n) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) parts.push_back(item);
    if (parts.empty() || parts[0].empty()) throw PreconditionError("empty speed specification");
    std::string name = parts[0];
    int k = 0;
    if (const auto colon = name.find(':'); colon != std::string::npos) {
        try {
            std::size_t used = 0;
            k = std::stoi(name.substr(colon + 1), &used);
            if (used != name.size() - colon - 1) throw std::invalid_argument("k");
        } catch (const std::exception&) {
            throw PreconditionError("bad speed index in '" + text + "'");
        }
        name = name.substr(0, colon);
        if (name != "pow_Ek") throw PreconditionError("only pow_Ek takes an index");
    }
    double alpha = 2.0;
    double delta0 = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string::npos) throw PreconditionError("expected key=value in '" + parts[i] + "'");
        const std::string key = parts[i].substr(0, eq);
        double value = 0.0;
        try {
            std::size_t used = 0;
            value = std::stod(parts[i].substr(eq + 1), &used);
            if (used != parts[i].size() - eq - 1) throw std::invalid_argument("value");
        } catch (const std::exception&) {
            throw PreconditionError("bad number in '" + parts[i] + "'");
        }
        if (key == "alpha") alpha = value;
        else if (key == "delta0") delta0 = value;
        else throw PreconditionError("unknown speed parameter '" + key + "'");
    }
    return builtin(name, n, alpha, k, delta0);
}

/// Per-node speed and the eigenvalue range of its linearisation.
struct SpeedEvaluation {
    std::vector<double> F;
    std::vector<double> lambda_min;
    std::vector<double> lambda_max;
    std::vector<double> trace;
};

inline SpeedEvaluation evaluate_speed(const SpeedSpec& spec, const CurvatureField& curv) {
    if (spec.dimension != curv.dimension) throw DimensionError("speed and body dimensions differ");
    SpeedEvaluation out;
    const std::size_t N = curv.size();
    out.F.resize(N);
    out.lambda_min.resize(N);
    out.lambda_max.resize(N);
    out.trace.resize(N);
    double g[2];
    for (std::size_t i = 0; i < N; ++i) {
        const Kappa k = curv.kappa_at(i);
        out.F[i] = spec.f(k);
        spec.df(k, std::span<double>(g, k.size()));
        out.lambda_min[i] = *std::min_element(g, g + k.size());
        out.lambda_max[i] = *std::max_element(g, g + k.size());
        out.trace[i] = 0.0;
        for (std::size_t j = 0; j < k.size(); ++j) out.trace[i] += g[j];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo checks

struct ConditionFailure {
    std::string condition;
    std::vector<double> witness;
    double value = 0.0;
};

struct ConditionReport {
    std::string speed;
    std::size_t samples = 0;
    double normalization = 0.0;
    double normalization_error = 0.0;
    double min_value = std::numeric_limits<double>::infinity();
    double min_gradient = std::numeric_limits<double>::infinity();
    double max_homogeneity_error = 0.0;
    double max_euler_error = 0.0;
    double max_gradient_error = 0.0;
    std::vector<ConditionFailure> failures;

    bool passed() const { return failures.empty(); }
};

struct ConditionTolerances {
    double homogeneity = 1e-9;
    double euler = 1e-9;
    double gradient = 1e-5;
    double normalization = 1e-12;
};

/// Central finite-difference gradient with step 1e-6 |kappa|.
inline std::vector<double> fd_gradient(const SpeedSpec& spec, Kappa kappa) {
    double norm = 0.0;
    for (double v : kappa) norm += v * v;
    const double h = 1e-6 * std::sqrt(norm);
    std::vector<double> x(kappa.begin(), kappa.end()), g(kappa.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = spec.f(x);
        x[i] = x0 - h;
        const double fm = spec.f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Positivity, monotonicity, homogeneity, Euler relation, normalisation and the
/// analytic gradient, on random points of the speed's cone.
inline ConditionReport check_conditions(const SpeedSpec& spec, std::size_t samples, std::uint64_t seed = 1,
                                        const ConditionTolerances& tol = {}) {
    ConditionReport r;
    r.speed = spec.describe();
    r.samples = samples;
    const int n = spec.dimension;
    auto fail = [&r](const std::string& what, Kappa k, double value) {
        for (const auto& f : r.failures)
            if (f.condition == what) return;
        r.failures.push_back({what, std::vector<double>(k.begin(), k.end()), value});
    };

    r.normalization = spec.normalization();
    const double expect = std::pow(static_cast<double>(n), spec.alpha);
    r.normalization_error = std::abs(r.normalization - expect) / expect;
    const std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
    if (!(r.normalization_error <= tol.normalization)) fail("normalization", ones, r.normalization);

    const double ratio_max = std::isfinite(spec.delta0) ? spec.delta0 : 0.0;
    std::mt19937_64 rng(seed);
    std::vector<double> g(static_cast<std::size_t>(n)), gk(static_cast<std::size_t>(n)), kk(static_cast<std::size_t>(n));
    for (std::size_t s = 0; s < samples; ++s) {
        const std::vector<double> k = sample_cone(n, ratio_max, rng, s);
        const double F = spec.f(k);
        r.min_value = std::min(r.min_value, F);
        if (!(F > 0.0)) fail("positivity", k, F);
        spec.df(k, g);
        double gmax = 0.0, euler = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            r.min_gradient = std::min(r.min_gradient, g[i]);
            if (!(g[i] > 0.0)) fail("monotonicity", k, g[i]);
            gmax = std::max(gmax, std::abs(g[i]));
            euler += k[i] * g[i];
        }
        const double eerr = std::abs(spec.alpha * F - euler) / std::abs(F);
        r.max_euler_error = std::max(r.max_euler_error, eerr);
        if (!(eerr <= tol.euler)) fail("euler", k, eerr);
        for (double lambda : {0.5, 2.0}) {
            for (std::size_t i = 0; i < k.size(); ++i) kk[i] = lambda * k[i];
            const double herr = std::abs(spec.f(kk) - std::pow(lambda, spec.alpha) * F) / (std::pow(lambda, spec.alpha) * std::abs(F));
            r.max_homogeneity_error = std::max(r.max_homogeneity_error, herr);
            if (!(herr <= tol.homogeneity)) fail("homogeneity", k, herr);
        }
        const std::vector<double> fd = fd_gradient(spec, k);
        double gerr = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) gerr = std::max(gerr, std::abs(fd[i] - g[i]));
        gerr /= gmax > 0.0 ? gmax : 1.0;
        r.max_gradient_error = std::max(r.max_gradient_error, gerr);
        if (!(gerr <= tol.gradient)) fail("gradient", k, gerr);
    }
    return r;
}

/// F(A) = f(eigenvalues of A) for a symmetric matrix.
inline double matrix_speed(const SpeedSpec& spec, const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = es.eigenvalues();
    return spec.f(std::span<const double>(ev.data(), static_cast<std::size_t>(ev.size())));
}

/// Fourth-order finite-difference second directional derivative d^2/ds^2 F(A + s B).
inline double second_directional_derivative(const SpeedSpec& spec, const Eigen::MatrixXd& A,
                                             const Eigen::MatrixXd& B, double h = 1e-3) {
    const double scale = std::max(A.norm(), 1e-300);
    const double t = h * scale;
    const double f0 = matrix_speed(spec, A);
    const double f1 = matrix_speed(spec, A + t * B), fm1 = matrix_speed(spec, A - t * B);
    const double f2 = matrix_speed(spec, A + 2.0 * t * B), fm2 = matrix_speed(spec, A - 2.0 * t * B);
    return (-f2 + 16.0 * f1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * t * t);
}

struct MuEstimate {
    double mu = 0.0;
    std::size_t samples = 0;
    std::vector<double> witness; // kappa(A) attaining the maximum
};

/// Largest |F''(A)[B, B]| over unit B, maximised over sampled A with tr A = 1 in the cone.
/// For each A the maximum over B is the operator norm of the second-derivative form on
/// symmetric matrices, assembled from finite differences in a Frobenius-orthonormal basis.
inline MuEstimate estimate_mu(const SpeedSpec& spec, std::size_t samples, std::uint64_t seed = 7) {
    const int n = spec.dimension;
    std::vector<Eigen::MatrixXd> basis;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
            if (i == j) b(i, i) = 1.0;
            else b(i, j) = b(j, i) = 1.0 / std::sqrt(2.0);
            basis.push_back(b);
        }
    const auto m = static_cast<Eigen::Index>(basis.size());
    MuEstimate out;
    out.samples = samples;
    const double ratio_max = std::isfinite(spec.delta0) ? spec.delta0 : 0.0;
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd form(m, m);
    for (std::size_t s = 0; s < samples; ++s) {
        const std::vector<double> k = sample_cone(n, ratio_max, rng, s, 1.0);
        const Eigen::MatrixXd Q = random_orthogonal(n, rng);
        Eigen::VectorXd kv(n);
        for (int i = 0; i < n; ++i) kv(i) = k[static_cast<std::size_t>(i)];
        const Eigen::MatrixXd A = Q * kv.asDiagonal() * Q.transpose();
        for (Eigen::Index a = 0; a < m; ++a) form(a, a) = second_directional_derivative(spec, A, basis[static_cast<std::size_t>(a)]);
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = a + 1; b < m; ++b) {
                const Eigen::MatrixXd& Ba = basis[static_cast<std::size_t>(a)];
                const Eigen::MatrixXd& Bb = basis[static_cast<std::size_t>(b)];
                const double p = second_directional_derivative(spec, A, Ba + Bb);
                const double q = second_directional_derivative(spec, A, Ba - Bb);
                form(a, b) = form(b, a) = 0.25 * (p - q);
            }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form, Eigen::EigenvaluesOnly);
        const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
        if (norm > out.mu) {
            out.mu = norm;
            out.witness = k;
        }
    }
    return out;
}

struct DerivativeBoundReport {
    double mu = 0.0;
    std::size_t samples = 0;
    std::size_t dF_violations = 0;
    /// F bound with coefficient mu / (2 alpha).
    std::size_t F_violations = 0;
    /// F bound with the second-order Taylor coefficient mu / 2.
    std::size_t F_violations_taylor = 0;
    double worst_dF_slack = std::numeric_limits<double>::infinity();
    double worst_F_slack = std::numeric_limits<double>::infinity();
    double worst_F_slack_taylor = std::numeric_limits<double>::infinity();
    std::vector<double> dF_witness, F_witness;

    bool passed() const { return dF_violations == 0 && F_violations_taylor == 0; }
};

/// Checks the first-derivative and value bounds implied by a second-derivative bound mu.
/// Slacks are relative to H^(alpha-1) and H^alpha respectively; a point violates a bound
/// when its slack is below -1e-9.
inline DerivativeBoundReport verify_derivative_bounds(const SpeedSpec& spec, double mu, std::size_t samples,
                                                      std::uint64_t seed = 11) {
    DerivativeBoundReport r;
    r.mu = mu;
    r.samples = samples;
    const int n = spec.dimension;
    const double a = spec.alpha;
    const double ratio_max = std::isfinite(spec.delta0) ? spec.delta0 : 0.0;
    std::mt19937_64 rng(seed);
    std::vector<double> g(static_cast<std::size_t>(n));
    constexpr double tol = 1e-9;
    for (std::size_t s = 0; s < samples; ++s) {
        const std::vector<double> k = s == 0 ? std::vector<double>(static_cast<std::size_t>(n), 0.7)
                                             : sample_cone(n, ratio_max, rng, s);
        const CurvatureScalars c = curvature_scalars(k);
        const double H = c.H, Ao = std::sqrt(c.traceless2);
        spec.df(k, g);
        const double centre = a * std::pow(H, a - 1.0);
        const double radius = mu * std::pow(H, a - 2.0) * Ao;
        for (double gi : g) {
            const double slack = (radius - std::abs(gi - centre)) / std::pow(H, a - 1.0);
            if (slack < r.worst_dF_slack) r.worst_dF_slack = slack;
            if (slack < -tol) {
                ++r.dF_violations;
                if (r.dF_witness.empty()) r.dF_witness = k;
                break;
            }
        }
        const double F = spec.f(k);
        const double dev = std::abs(F - std::pow(H, a));
        const double quad = mu * std::pow(H, a - 2.0) * c.traceless2;
        const double slack = (quad / (2.0 * a) - dev) / std::pow(H, a);
        const double slack_taylor = (quad / 2.0 - dev) / std::pow(H, a);
        r.worst_F_slack = std::min(r.worst_F_slack, slack);
        r.worst_F_slack_taylor = std::min(r.worst_F_slack_taylor, slack_taylor);
        if (slack < -tol) {
            ++r.F_violations;
            if (r.F_witness.empty()) r.F_witness = k;
        }
        if (slack_taylor < -tol) ++r.F_violations_taylor;
    }
    return r;
}

} // namespace curvflow
