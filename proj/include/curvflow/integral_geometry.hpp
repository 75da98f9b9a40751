#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "curvflow/convex_body.hpp"
#include "curvflow/linear_program.hpp"
#include "curvflow/symmetric.hpp"

namespace curvflow {

/// Normalised mean cross-sectional volumes V_0..V_{n+1}.
struct MixedVolumes {
    int dimension = 2;
    std::vector<double> V;         // canonical values (average where both formulas exist)
    std::vector<double> formula_a; // (1/|S^n|) int sigma_k(r) / C(n,k), 0 <= k <= n
    std::vector<double> formula_b; // (1/|S^n|) int s sigma_{k-1}(r) / C(n,k-1), 1 <= k <= n+1
    double iso_ratio = 1.0;        // V_1^{n+1} / V_{n+1}

    /// Largest |A - B| / V_k over 1 <= k <= n.
    double max_formula_gap() const {
        double g = 0.0;
        for (int k = 1; k <= dimension; ++k)
            g = std::max(g, std::abs(formula_a[static_cast<std::size_t>(k)] - formula_b[static_cast<std::size_t>(k)])
                                / std::abs(V[static_cast<std::size_t>(k)]));
        return g;
    }
};

inline MixedVolumes mixed_volumes(const SupportFunction& body, const CurvatureField& curv) {
    const int n = body.dimension();
    const SphereGrid& grid = body.grid();
    const auto w = grid.weights();
    const auto s = body.values();
    const double area = grid.measure();
    MixedVolumes mv;
    mv.dimension = n;
    mv.formula_a.assign(static_cast<std::size_t>(n + 2), std::numeric_limits<double>::quiet_NaN());
    mv.formula_b.assign(static_cast<std::size_t>(n + 2), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> acc_a(static_cast<std::size_t>(n + 1), 0.0), acc_b(static_cast<std::size_t>(n + 2), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto sigma = elementary_symmetric(curv.radii_at(i));
        for (int k = 0; k <= n; ++k) {
            const double e = sigma[static_cast<std::size_t>(k)] / binomial(n, k);
            acc_a[static_cast<std::size_t>(k)] += w[i] * e;
            acc_b[static_cast<std::size_t>(k + 1)] += w[i] * s[i] * e;
        }
    }
    for (int k = 0; k <= n; ++k) mv.formula_a[static_cast<std::size_t>(k)] = acc_a[static_cast<std::size_t>(k)] / area;
    for (int k = 1; k <= n + 1; ++k) mv.formula_b[static_cast<std::size_t>(k)] = acc_b[static_cast<std::size_t>(k)] / area;
    mv.V.resize(static_cast<std::size_t>(n + 2));
    mv.V[0] = mv.formula_a[0];
    for (int k = 1; k <= n; ++k)
        mv.V[static_cast<std::size_t>(k)] = 0.5 * (mv.formula_a[static_cast<std::size_t>(k)] + mv.formula_b[static_cast<std::size_t>(k)]);
    mv.V[static_cast<std::size_t>(n + 1)] = mv.formula_b[static_cast<std::size_t>(n + 1)];
    mv.iso_ratio = std::pow(mv.V[1], n + 1) / mv.V[static_cast<std::size_t>(n + 1)];
    return mv;
}

inline MixedVolumes mixed_volumes(const SupportFunction& body) { return mixed_volumes(body, curvature(body)); }

struct DiskantBounds {
    double lower = 0.0; // lower bound on r_-
    double upper = 0.0; // upper bound on r_+
    bool lower_clamped = false;
    bool upper_clamped = false;
};

/// Inradius / circumradius bounds from V_1, V_n and V_{n+1}.
inline DiskantBounds diskant_bounds(const MixedVolumes& mv) {
    const int n = mv.dimension;
    const double vol = mv.V[static_cast<std::size_t>(n + 1)];
    if (!(vol > 0.0)) throw PreconditionError("Diskant bounds need V_{n+1} > 0");
    const double lambda = std::pow(vol, 1.0 / (n + 1));
    const double vn = mv.V[static_cast<std::size_t>(n)] / std::pow(lambda, n);
    const double v1 = mv.V[1] / lambda;
    DiskantBounds d;
    double rad = std::pow(vn, (n + 1.0) / n) - 1.0;
    if (rad < 0.0) {
        d.lower_clamped = true;
        rad = 0.0;
    }
    d.lower = lambda * (std::pow(vn, 1.0 / n) - std::pow(rad, 1.0 / (n + 1)));
    rad = std::pow(v1, (n + 1.0) / n) - 1.0;
    if (rad < 0.0) {
        d.upper_clamped = true;
        rad = 0.0;
    }
    const double denom = std::pow(v1, 1.0 / n) - std::pow(rad, 1.0 / (n + 1));
    d.upper = denom > 0.0 ? lambda / denom : std::numeric_limits<double>::infinity();
    return d;
}

struct RadiusReport {
    double r_minus = 0.0;
    double r_plus = 0.0;
    Eigen::Vector3d incenter = Eigen::Vector3d::Zero();
    Eigen::Vector3d circumcenter = Eigen::Vector3d::Zero();
    double diskant_lower = 0.0;
    double diskant_upper = 0.0;
    bool diskant_clamped = false;
    double ratio = 1.0;
};

/// Directions used by the radius LPs: the grid nodes plus both poles on S^2; on S^1 a
/// 16x oversampled equispaced set (which contains the coordinate axes).
inline std::vector<std::pair<Eigen::Vector3d, double>> support_samples(const SupportFunction& body) {
    std::vector<std::pair<Eigen::Vector3d, double>> out;
    if (body.dimension() == 1) {
        const int count = 16 * body.grid().ring_size();
        for (int k = 0; k < count; ++k) {
            const double t = 2.0 * std::numbers::pi * k / count;
            const Eigen::Vector3d u(std::cos(t), std::sin(t), 0.0);
            out.emplace_back(u, evaluate(body.field(), u));
        }
        return out;
    }
    const auto nodes = body.grid().nodes();
    const auto s = body.values();
    for (std::size_t i = 0; i < nodes.size(); ++i) out.emplace_back(nodes[i], s[i]);
    for (double z : {1.0, -1.0}) {
        const Eigen::Vector3d u(0.0, 0.0, z);
        out.emplace_back(u, evaluate(body.field(), u));
    }
    return out;
}

namespace detail {

using SupportSamples = std::vector<std::pair<Eigen::Vector3d, double>>;

struct RadiusLp {
    Eigen::Vector3d centre = Eigen::Vector3d::Zero();
    double radius = 0.0;
    std::vector<std::size_t> active;
};

/// Largest ball inside (sign = +1) or smallest ball around (sign = -1) the sampled half-spaces.
/// Solved through the dual: min sum sign s_i y_i, sum y_i sign (u_i, 1) = (0, sign), y >= 0.
inline RadiusLp radius_lp(const SupportSamples& samples, int n, double sign) {
    const int d = n + 1;
    const auto m = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd A(d + 1, m);
    Eigen::VectorXd c(m), b = Eigen::VectorXd::Zero(d + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& [u, s] = samples[static_cast<std::size_t>(i)];
        for (int a = 0; a < d; ++a) A(a, i) = sign * u(a);
        A(d, i) = sign;
        c(i) = sign * s;
    }
    b(d) = sign;
    const LpResult r = solve_standard_lp(A, b, c);
    RadiusLp out;
    for (int a = 0; a < d; ++a) out.centre(a) = r.multipliers(a);
    out.radius = r.multipliers(d);
    for (Eigen::Index i = 0; i < m; ++i)
        if (r.y(i) > 0.0) out.active.push_back(static_cast<std::size_t>(i));
    return out;
}

/// Midpoint of the bounding box of all centres achieving `radius` (relaxed by `slack`).
inline Eigen::Vector3d face_midpoint(const SupportSamples& samples, int n, double sign, double radius, double slack) {
    const int d = n + 1;
    const auto m = static_cast<Eigen::Index>(samples.size());
    // centres satisfy sign <u_i, c> <= sign (s_i - radius) + slack
    Eigen::MatrixXd A(d, m);
    Eigen::VectorXd cost(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& [u, s] = samples[static_cast<std::size_t>(i)];
        for (int a = 0; a < d; ++a) A(a, i) = sign * u(a);
        cost(i) = sign * (s - radius) + slack;
    }
    Eigen::Vector3d mid = Eigen::Vector3d::Zero();
    for (int a = 0; a < d; ++a) {
        double hi = 0.0, lo = 0.0;
        for (double dir : {1.0, -1.0}) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
            e(a) = dir;
            const LpResult r = solve_standard_lp(A, e, cost);
            (dir > 0 ? hi : lo) = r.multipliers(a);
        }
        mid(a) = 0.5 * (hi + lo);
    }
    return mid;
}

} // namespace detail

/// Inradius and circumradius by linear programming over the sampled support constraints.
/// Centres are the midpoints of the optimal faces, so bodies whose symmetries preserve
/// the direction set get symmetric centres.
inline RadiusReport direct_radii(const SupportFunction& body) {
    const auto samples = support_samples(body);
    const int n = body.dimension();
    const double slack = 1e-9 * std::max(1e-300, std::abs(body.mean()));
    RadiusReport r;
    const auto inner = detail::radius_lp(samples, n, 1.0);
    r.r_minus = inner.radius;
    r.incenter = detail::face_midpoint(samples, n, 1.0, inner.radius, slack);
    const auto outer = detail::radius_lp(samples, n, -1.0);
    r.r_plus = outer.radius;
    r.circumcenter = detail::face_midpoint(samples, n, -1.0, outer.radius, slack);
    r.ratio = r.r_plus / r.r_minus;
    return r;
}

/// Direct radii together with the Diskant bounds of the same body.
inline RadiusReport radius_report(const SupportFunction& body, const MixedVolumes& mv) {
    RadiusReport r = direct_radii(body);
    const DiskantBounds d = diskant_bounds(mv);
    r.diskant_lower = d.lower;
    r.diskant_upper = d.upper;
    r.diskant_clamped = d.lower_clamped || d.upper_clamped;
    return r;
}

/// Smallest constant C with E_k <= (1 + eps) E_l^{k/l} + C on the body: max over nodes.
inline double ek_comparison_margin(const CurvatureField& curv, int k, int l, double eps) {
    if (!(1 <= k && k < l && l <= curv.dimension)) throw PreconditionError("need 1 <= k < l <= n");
    if (!(eps > 0.0)) throw PreconditionError("comparison margin needs eps > 0");
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < curv.size(); ++i) {
        const double Ek = curv.E[i][static_cast<std::size_t>(k)];
        const double El = curv.E[i][static_cast<std::size_t>(l)];
        best = std::max(best, Ek - (1.0 + eps) * std::pow(El, static_cast<double>(k) / l));
    }
    return best;
}

struct GeomboundRow {
    double rho = 0.0;
    double C2 = std::numeric_limits<double>::infinity(); // +inf when never violated
    std::size_t violations = 0;
    std::size_t below = 0; // snapshots with r_+ < C2
};

struct GeomboundTable {
    std::vector<std::pair<double, double>> radii; // (r_+, r_+/r_-) per snapshot
    std::vector<GeomboundRow> rows;
    bool monotone = true; // C2 non-decreasing in rho
};

/// Empirical C_2(rho): every observed snapshot with r_+ < C_2(rho) has r_+ <= (1 + rho) r_-.
inline GeomboundTable geombound_check(std::span<const RadiusReport> radii, std::span<const double> rho_grid) {
    GeomboundTable t;
    for (const auto& r : radii) t.radii.emplace_back(r.r_plus, r.r_plus / r.r_minus);
    for (double rho : rho_grid) {
        GeomboundRow row;
        row.rho = rho;
        for (const auto& [rp, ratio] : t.radii)
            if (ratio > 1.0 + rho) {
                ++row.violations;
                row.C2 = std::min(row.C2, rp);
            }
        for (const auto& pr : t.radii)
            if (pr.first < row.C2) ++row.below;
        t.rows.push_back(row);
    }
    std::vector<GeomboundRow> sorted = t.rows;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.rho < b.rho; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].C2 < sorted[i - 1].C2) t.monotone = false;
    return t;
}

} // namespace curvflow
