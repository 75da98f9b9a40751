#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "curvflow/flow_engine.hpp"
#include "curvflow/parallel.hpp"
#include "curvflow/sampling.hpp"
#include "curvflow/symmetric.hpp"

namespace curvflow {

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Algebraic lemma suites

struct LemmaReport {
    std::string lemma;
    int dimension = 2;
    std::size_t samples = 0;
    std::size_t violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity(); // normalised, >= -tolerance passes
    std::vector<double> worst_witness;
    double tolerance = 1e-12;

    bool passed() const { return violations == 0; }
};

namespace detail {

/// Runs margin(kappa) over `samples` cone samples in fixed chunks and merges the results in chunk order.
template <class Margin>
LemmaReport lemma_suite(const std::string& name, int n, std::size_t samples, std::uint64_t seed, Margin&& margin) {
    if (n < 2) throw DimensionError(name + " suite needs n >= 2");
    const std::size_t chunks = 16;
    std::vector<LemmaReport> parts(chunks);
    const double ratio_max = 1.0 / (n * (n - 1.0));
    parallel_chunks(samples, chunks, [&](std::size_t b, std::size_t e, std::size_t c) {
        std::mt19937_64 rng(chunk_seed(seed + static_cast<std::uint64_t>(n), c));
        LemmaReport& r = parts[c];
        for (std::size_t i = b; i < e; ++i) {
            const std::vector<double> k = sample_cone(n, ratio_max, rng, i);
            const double m = margin(std::span<const double>(k));
            if (m < -r.tolerance) ++r.violations;
            if (m < r.worst_margin) {
                r.worst_margin = m;
                r.worst_witness = k;
            }
        }
    });
    LemmaReport out;
    out.lemma = name;
    out.dimension = n;
    out.samples = samples;
    for (const auto& p : parts) {
        out.violations += p.violations;
        if (p.worst_margin < out.worst_margin) {
            out.worst_margin = p.worst_margin;
            out.worst_witness = p.worst_witness;
        }
    }
    return out;
}

} // namespace detail

/// Normalised margin of the eigenvalue pinching bounds (1 -+ sqrt(n(n-1)eps)) H/n, with
/// eps = ||A°||^2 / H^2.  Also checks that the bound factors are the roots of
/// z^2 - 2z + (1 - n(n-1)eps) = 0.
inline double pinch_margin(std::span<const double> k) {
    const int n = static_cast<int>(k.size());
    const CurvatureScalars c = curvature_scalars(k);
    const double x = n * (n - 1.0) * c.traceless2 / (c.H * c.H);
    const double q = std::sqrt(x);
    double m = 0.0;
    for (double z : {1.0 - q, 1.0 + q}) m = std::min(m, -std::abs(z * z - 2.0 * z + (1.0 - x)));
    const double unit = c.H / n;
    for (double v : k) {
        m = std::min(m, (v - (1.0 - q) * unit) / unit);
        m = std::min(m, ((1.0 + q) * unit - v) / unit);
        if (!(v > 0.0)) m = std::min(m, -1.0);
    }
    return m;
}

/// (nC - (1 + n eps) H |A|^2 - eps (1 + n eps)(1 - sqrt(n(n-1)eps)) H^3) / H^3.
inline double cest_margin(std::span<const double> k) {
    const int n = static_cast<int>(k.size());
    const CurvatureScalars c = curvature_scalars(k);
    const double eps = c.traceless2 / (c.H * c.H);
    const double H3 = c.H * c.H * c.H;
    const double lhs = n * c.C - (1.0 + n * eps) * c.H * c.norm_A2;
    const double rhs = eps * (1.0 + n * eps) * (1.0 - std::sqrt(n * (n - 1.0) * eps)) * H3;
    return (lhs - rhs) / H3;
}

/// -| |A|^2 - H^2/n - (1/n) sum_{i<j} (k_i - k_j)^2 | / |A|^2.
inline double traceless_identity_margin(std::span<const double> k) {
    const int n = static_cast<int>(k.size());
    double H = 0.0, A2 = 0.0, pairs = 0.0;
    for (double x : k) {
        H += x;
        A2 += x * x;
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs += (k[static_cast<std::size_t>(i)] - k[static_cast<std::size_t>(j)]) * (k[static_cast<std::size_t>(i)] - k[static_cast<std::size_t>(j)]);
    return -std::abs(A2 - H * H / n - pairs / n) / A2;
}

/// min_k (E_k^{1/k} - E_{k+1}^{1/(k+1)}) / E_1.
inline double maclaurin_margin(std::span<const double> k) {
    const std::vector<double> E = normalized_symmetric(k);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j + 1 < E.size(); ++j)
        m = std::min(m, (std::pow(E[j], 1.0 / j) - std::pow(E[j + 1], 1.0 / (j + 1))) / E[1]);
    return m;
}

inline LemmaReport lemma_pinch_suite(int n, std::size_t samples, std::uint64_t seed = 101) {
    return detail::lemma_suite("pinch_bounds", n, samples, seed, pinch_margin);
}
inline LemmaReport lemma_cest_suite(int n, std::size_t samples, std::uint64_t seed = 202) {
    return detail::lemma_suite("cubic_estimate", n, samples, seed, cest_margin);
}
inline LemmaReport lemma_traceless_suite(int n, std::size_t samples, std::uint64_t seed = 303) {
    return detail::lemma_suite("traceless_identity", n, samples, seed, traceless_identity_margin);
}
inline LemmaReport lemma_maclaurin_suite(int n, std::size_t samples, std::uint64_t seed = 404) {
    return detail::lemma_suite("maclaurin_chain", n, samples, seed, maclaurin_margin);
}

/// All four suites for n = 2, 3, 4.
inline std::vector<LemmaReport> run_lemma_suites(std::size_t samples = 100000) {
    std::vector<LemmaReport> out;
    for (int n : {2, 3, 4}) {
        out.push_back(lemma_pinch_suite(n, samples));
        out.push_back(lemma_cest_suite(n, samples));
        out.push_back(lemma_traceless_suite(n, samples));
        out.push_back(lemma_maclaurin_suite(n, samples));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient inequalities on a surface (n = 2)

struct GradientMargins {
    double norm_margin = 0.0;      // min_x |grad A|^2 - 3/(n+2) |grad H|^2
    double traceless_margin = 0.0; // min_x |grad A°|^2 - 2(n-1)/(3n) |grad A|^2
    double grad_A_max = 0.0;       // max_x |grad A|^2
    double asymmetry = 0.0;        // max |T_abc - T_bac| / max |T|, Codazzi defect of the discrete data
    double tolerance = 0.0;        // discretisation scale used for the verdict
    bool inconclusive = false;

    bool passed() const { return !inconclusive && norm_margin >= -tolerance && traceless_margin >= -tolerance; }
};

/// In the Gauss chart h = R, g = R^2 and nabla h = -(nabla-bar R) with nabla-bar R = nabla-bar^3 s + ds (x) g-bar.
inline GradientMargins gradient_inequality_monitor(const SupportFunction& body, const CurvatureField& curv) {
    if (body.dimension() != 2) throw DimensionError("gradient inequality monitor needs n = 2");
    const SphereGrid& grid = body.grid();
    const auto third = third_derivatives(body.field(), grid);
    const auto td = tangential_derivatives(body.field(), grid);
    const int n = 2;
    GradientMargins out;
    out.norm_margin = out.traceless_margin = std::numeric_limits<double>::infinity();
    double tmax = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double T[2][2][2];
        for (int c = 0; c < 2; ++c)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    T[c][a][b] = third[i][static_cast<std::size_t>(c)][static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]
                                 + (a == b ? td.gradient[i](c) : 0.0);
        for (int c = 0; c < 2; ++c)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    tmax = std::max(tmax, std::abs(T[c][a][b]));
                    out.asymmetry = std::max(out.asymmetry, std::abs(T[c][a][b] - T[a][c][b]));
                }
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(curv.radii_matrix[i]);
        const Eigen::Matrix2d Q = es.eigenvectors();
        const Eigen::Vector2d kappa = es.eigenvalues().cwiseInverse();
        double P[2][2][2] = {}; // T in the principal frame
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y)
                for (int z = 0; z < 2; ++z)
                    for (int c = 0; c < 2; ++c)
                        for (int a = 0; a < 2; ++a)
                            for (int b = 0; b < 2; ++b) P[x][y][z] += Q(c, x) * Q(a, y) * Q(b, z) * T[c][a][b];
        double gradA = 0.0, gradH = 0.0;
        for (int x = 0; x < 2; ++x) {
            double dH = 0.0;
            for (int y = 0; y < 2; ++y) {
                dH -= kappa(y) * kappa(y) * P[x][y][y];
                for (int z = 0; z < 2; ++z)
                    gradA += kappa(x) * kappa(x) * kappa(y) * kappa(y) * kappa(z) * kappa(z) * P[x][y][z] * P[x][y][z];
            }
            gradH += kappa(x) * kappa(x) * dH * dH;
        }
        const double gradTraceless = gradA - gradH / n;
        out.grad_A_max = std::max(out.grad_A_max, gradA);
        out.norm_margin = std::min(out.norm_margin, gradA - 3.0 / (n + 2.0) * gradH);
        out.traceless_margin = std::min(out.traceless_margin, gradTraceless - 2.0 * (n - 1.0) / (3.0 * n) * gradA);
    }
    if (tmax > 0.0) out.asymmetry /= tmax;
    // the inequalities are exact for totally symmetric T; the Codazzi defect sets the error scale
    out.tolerance = std::max(1e-6, 10.0 * out.asymmetry) * out.grad_A_max + 1e-12;
    const double top = degree_energy(body.field(), body.degree());
    double total = 0.0;
    for (double c : body.field().coefficients) total += c * c;
    out.inconclusive = top > 1e-16 * total;
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory monitors

struct PinchingRow {
    double t = 0.0;
    double pinch_max = 0.0;   // max ||A°||^2 / H^2
    double Z_sigma_max = 0.0; // max ||A°||^2 - sigma H^2
    double Z_tolerance = 0.0; // 1e-10 sigma H_max^2
    double H_max = 0.0;
    double improved_max = nan_value; // max ||A°||^2 - sigma0 h^lambda H^(2 - lambda), when lambda-hat exists
};

struct PinchingMonitor {
    double sigma = 0.0;
    double sigma0 = 0.0;
    std::vector<PinchingRow> rows;
    double lambda_hat = nan_value;
    bool lambda_available = false;
    std::vector<std::pair<double, double>> C1; // (eps, C1-hat(eps))
    bool Z_preserved = true;                  // Z_sigma max <= tolerance at every snapshot
};

inline PinchingMonitor pinching_monitors(const Trajectory& traj, double sigma, double sigma0,
                                         const std::vector<double>& eps_grid = {0.01, 0.05, 0.1}) {
    PinchingMonitor m;
    m.sigma = sigma;
    m.sigma0 = sigma0;
    const auto& snaps = traj.snapshots;
    std::vector<CurvatureField> curv(snaps.size());
    parallel_for(snaps.size(), [&](std::size_t i) { curv[i] = curvature(snaps[i].body); });
    m.C1.reserve(eps_grid.size());
    for (double e : eps_grid) m.C1.emplace_back(e, -std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < snaps.size(); ++s) {
        const CurvatureField& c = curv[s];
        PinchingRow row;
        row.t = snaps[s].t;
        row.Z_sigma_max = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double H = c.H[i];
            row.pinch_max = std::max(row.pinch_max, c.traceless2[i] / (H * H));
            row.Z_sigma_max = std::max(row.Z_sigma_max, c.traceless2[i] - sigma * H * H);
            row.H_max = std::max(row.H_max, H);
            const double k1 = c.kappa[i][0], kn = c.kappa[i][static_cast<std::size_t>(c.dimension - 1)];
            for (auto& [e, C] : m.C1) C = std::max(C, kn - (1.0 + e) * k1);
        }
        row.Z_tolerance = 1e-10 * sigma * row.H_max * row.H_max;
        if (row.Z_sigma_max > row.Z_tolerance) m.Z_preserved = false;
        m.rows.push_back(row);
    }
    if (m.rows.empty()) return m;
    // lambda-hat: negative slope of log(pinch_max) against log(H_max / h) where H_max >= h;
    // ratios at roundoff level (curvature spread ~1e-12) count as umbilic
    const double h = m.rows.front().H_max;
    std::vector<double> xs, ys;
    for (const auto& r : m.rows)
        if (r.H_max >= h && r.pinch_max > 1e-24) {
            xs.push_back(std::log(r.H_max / h));
            ys.push_back(std::log(r.pinch_max));
        }
    if (xs.size() >= 5) {
        const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
        const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        if (sxx > 0.0) {
            m.lambda_hat = -sxy / sxx;
            m.lambda_available = true;
        }
    }
    if (m.lambda_available)
        for (std::size_t s = 0; s < snaps.size(); ++s) {
            const CurvatureField& c = curv[s];
            double worst = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < c.size(); ++i)
                worst = std::max(worst, c.traceless2[i] - sigma0 * std::pow(h, m.lambda_hat) * std::pow(c.H[i], 2.0 - m.lambda_hat));
            m.rows[s].improved_max = worst;
        }
    return m;
}

struct TsoRow {
    double t = 0.0;
    double Q_max = 0.0;
    double bound = 0.0;
    bool violated = false;
};

struct TsoMonitor {
    std::size_t start = 0, end = 0;
    double r0 = 0.0;
    double sigma = 0.0;
    double C_tilde = 0.0;
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    std::vector<TsoRow> rows;
    std::size_t violations = 0;
    bool aborted = false;
    std::string witness;

    bool passed() const { return !aborted && violations == 0; }
};

/// Q = F / (2<X - o, nu> - r0) over snapshots start..end, with o the incenter and r0 the
/// inradius of snapshot `end`; time is measured from snapshot `start`.
inline TsoMonitor tso_monitor(const Trajectory& traj, std::size_t start, std::size_t end) {
    const auto& snaps = traj.snapshots;
    if (!(start <= end && end < snaps.size())) throw PreconditionError("Tso window out of range");
    TsoMonitor m;
    m.start = start;
    m.end = end;
    m.r0 = snaps[end].radii.r_minus;
    m.origin = snaps[end].radii.incenter;
    const double alpha = traj.alpha;
    const int n = traj.speed.dimension;
    for (std::size_t s = start; s <= end; ++s) m.sigma = std::max(m.sigma, snaps[s].summary.pinch_max);
    const double q = std::sqrt(n * (n - 1.0) * m.sigma);
    m.C_tilde = alpha * (1.0 - q) / (n * (1.0 + q));
    const double branch1 = std::pow(2.0 * (1.0 + alpha) / m.C_tilde, alpha) * std::pow(m.r0, -(1.0 + alpha));
    const double c2 = std::pow((1.0 + alpha) * m.C_tilde / (2.0 * alpha), -alpha / (1.0 + alpha)) / m.r0;
    for (std::size_t s = start; s <= end; ++s) {
        const auto& snap = snaps[s];
        const CurvatureField c = curvature(snap.body);
        const auto ev = evaluate_speed(traj.speed, c);
        const auto nodes = snap.body.grid().nodes();
        const auto v = snap.body.values();
        TsoRow row;
        row.t = snap.t;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double denom = 2.0 * (v[i] - m.origin.dot(nodes[i])) - m.r0;
            if (!(denom > 0.0)) {
                m.aborted = true;
                m.witness = "2<X,nu> - r0 = " + std::to_string(denom) + " at node " + std::to_string(i) + ", t = "
                            + std::to_string(snap.t);
                return m;
            }
            row.Q_max = std::max(row.Q_max, ev.F[i] / denom);
        }
        const double dt = snap.t - snaps[start].t;
        const double branch2 = dt > 0.0 ? c2 * std::pow(dt, -alpha / (1.0 + alpha)) : std::numeric_limits<double>::infinity();
        row.bound = std::max(branch1, branch2);
        row.violated = row.Q_max > row.bound;
        if (row.violated) ++m.violations;
        m.rows.push_back(row);
    }
    return m;
}

struct SmoczykMonitor {
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    std::vector<std::pair<double, double>> margins; // (t, min over nodes)
    double min_margin = std::numeric_limits<double>::infinity();
};

/// min over nodes of <X - p, nu> + (1 + alpha)(t - t0) F for snapshots from `start` on.
inline SmoczykMonitor smoczyk_monitor(const Trajectory& traj, std::size_t start, const Eigen::Vector3d& p) {
    const auto& snaps = traj.snapshots;
    if (start >= snaps.size()) throw PreconditionError("Smoczyk start index out of range");
    {
        const auto& b = snaps[start].body;
        const auto nodes = b.grid().nodes();
        const auto v = b.values();
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!(v[i] > p.dot(nodes[i])))
                throw PreconditionError("Smoczyk point is not enclosed by the start snapshot (node " + std::to_string(i) + ")");
    }
    SmoczykMonitor m;
    m.point = p;
    m.margins.resize(snaps.size() - start);
    parallel_for(snaps.size() - start, [&](std::size_t k) {
        const auto& snap = snaps[start + k];
        const auto ev = evaluate_speed(traj.speed, curvature(snap.body));
        const auto nodes = snap.body.grid().nodes();
        const auto v = snap.body.values();
        const double tau = snap.t - snaps[start].t;
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < v.size(); ++i)
            worst = std::min(worst, v[i] - p.dot(nodes[i]) + (1.0 + traj.alpha) * tau * ev.F[i]);
        m.margins[k] = {snap.t, worst};
    });
    for (const auto& [t, v] : m.margins) m.min_margin = std::min(m.min_margin, v);
    return m;
}

struct SpeedBoundFit {
    bool available = false;
    double slope = nan_value;     // expected -alpha / (1 + alpha)
    double intercept = nan_value; // log C
    std::size_t points = 0;
};

/// Fits log(min F) against log(T_hat - t) over the last `fraction` of the snapshots.
inline SpeedBoundFit speed_lowerbound_fit(const Trajectory& traj, double fraction = 0.3) {
    SpeedBoundFit out;
    const auto& s = traj.snapshots;
    if (s.empty() || !std::isfinite(traj.T_hat)) return out;
    const std::size_t count = static_cast<std::size_t>(std::ceil(fraction * s.size()));
    std::vector<double> xs, ys;
    for (std::size_t i = s.size() - std::min(count, s.size()); i < s.size(); ++i)
        if (s[i].t < traj.T_hat) {
            xs.push_back(std::log(traj.T_hat - s[i].t));
            ys.push_back(std::log(s[i].summary.F_min));
        }
    out.points = xs.size();
    if (xs.size() < 5) return out;
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) return out;
    out.available = true;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    return out;
}

enum class EvolvedQuantity { F, H };

struct EvolutionResidual {
    std::vector<std::pair<double, double>> rows; // (t, max-node residual)
    double max_residual = 0.0;
    bool inconclusive = false;
};

/// Curve case: D_t G = d_t G|_u + <grad-bar F, grad_M G> against the evolution equation
/// (G = F: Fdot (F_ss + k^2 F); G = H: F_ss + k^2 F), by central time differences.
inline EvolutionResidual curve_evolution_residual(const Trajectory& traj, EvolvedQuantity quantity,
                                                  double t_min = -std::numeric_limits<double>::infinity(),
                                                  double t_max = std::numeric_limits<double>::infinity()) {
    if (traj.speed.dimension != 1) throw DimensionError("curve evolution residual needs n = 1");
    const auto& snaps = traj.snapshots;
    EvolutionResidual out;
    if (snaps.size() < 3) {
        out.inconclusive = true;
        return out;
    }
    struct Spatial {
        std::vector<double> G, rhs, drift;
    };
    std::vector<Spatial> data(snaps.size());
    parallel_for(snaps.size(), [&](std::size_t s) {
        const SupportFunction& body = snaps[s].body;
        const SphereGrid& grid = body.grid();
        const auto td = tangential_derivatives(body.field(), grid);
        const auto t3 = third_derivatives(body.field(), grid);
        const std::size_t N = grid.size();
        std::vector<double> F(N), Fdot(N), kappa(N), r(N), r_t(N);
        for (std::size_t i = 0; i < N; ++i) {
            r[i] = td.hessian[i](0, 0) + td.values[i];
            r_t[i] = t3[i][0][0][0] + td.gradient[i](0);
            kappa[i] = 1.0 / r[i];
            const double k[1] = {kappa[i]};
            double g[1];
            F[i] = traj.speed.f(Kappa(k, 1));
            traj.speed.df(Kappa(k, 1), std::span<double>(g, 1));
            Fdot[i] = g[0];
        }
        const auto fd = tangential_derivatives(analyze(F, grid), grid);
        Spatial& d = data[s];
        d.G.resize(N);
        d.rhs.resize(N);
        d.drift.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double Ft = fd.gradient[i](0), Ftt = fd.hessian[i](0, 0);
            const double Fss = Ftt / (r[i] * r[i]) - Ft * r_t[i] / (r[i] * r[i] * r[i]);
            const double evo = Fss + kappa[i] * kappa[i] * F[i];
            const double Gt = quantity == EvolvedQuantity::F ? Ft : -r_t[i] / (r[i] * r[i]);
            d.G[i] = quantity == EvolvedQuantity::F ? F[i] : kappa[i];
            d.rhs[i] = quantity == EvolvedQuantity::F ? Fdot[i] * evo : evo;
            d.drift[i] = Ft * Gt / r[i];
        }
    });
    for (std::size_t s = 1; s + 1 < snaps.size(); ++s) {
        if (snaps[s].t < t_min || snaps[s].t > t_max) continue;
        const double h0 = snaps[s].t - snaps[s - 1].t, h1 = snaps[s + 1].t - snaps[s].t;
        double worst = 0.0, change = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < data[s].G.size(); ++i) {
            const double g0 = data[s - 1].G[i], g1 = data[s].G[i], g2 = data[s + 1].G[i];
            const double dt = (-h1 / (h0 * (h0 + h1))) * g0 + ((h1 - h0) / (h0 * h1)) * g1 + (h0 / (h1 * (h0 + h1))) * g2;
            worst = std::max(worst, std::abs(dt + data[s].drift[i] - data[s].rhs[i]));
            change = std::max(change, std::abs(g2 - g0));
            scale = std::max(scale, std::abs(g1));
        }
        if (change > 0.1 * scale) out.inconclusive = true;
        out.rows.emplace_back(snaps[s].t, worst);
        out.max_residual = std::max(out.max_residual, worst);
    }
    if (out.rows.empty()) out.inconclusive = true;
    return out;
}

// ---------------------------------------------------------------------------
// Per-snapshot diagnostics

struct MonitorConfig {
    double sigma = nan_value;  // default: 1.05 x initial pinch_max, at least 1e-10
    double sigma0 = nan_value; // default: sigma
    std::vector<double> eps_grid = {0.01, 0.05, 0.1};
    std::vector<double> rho_grid = {0.01, 0.05};
    bool gradient = true;
};

struct DiagnosticsRecord {
    double t = 0.0;
    double pinch_max = 0.0;
    double Z_sigma_max = 0.0;
    double Q_max = nan_value;
    double Q_bound = nan_value;
    double smoczyk_min = nan_value;
    double F_min = 0.0, F_max = 0.0;
    double H_max = 0.0;
    double gradient_margin = nan_value; // min of both gradient margins / max |grad A|^2
    double lambda_hat = nan_value;
    double speed_exponent = nan_value;
};

struct TrajectoryDiagnostics {
    std::vector<DiagnosticsRecord> records;
    PinchingMonitor pinching;
    TsoMonitor tso;
    SmoczykMonitor smoczyk;
    SpeedBoundFit speed_fit;
    GeomboundTable geombound;
    double gradient_worst = nan_value; // most negative normalised gradient margin
    bool gradient_passed = true;
};

inline TrajectoryDiagnostics diagnose(const Trajectory& traj, const MonitorConfig& cfg = {}) {
    TrajectoryDiagnostics d;
    const auto& snaps = traj.snapshots;
    if (snaps.empty()) throw PreconditionError("empty trajectory");
    const int n = traj.speed.dimension;
    const double sigma = std::isfinite(cfg.sigma) ? cfg.sigma : std::max(1.05 * snaps.front().summary.pinch_max, 1e-10);
    const double sigma0 = std::isfinite(cfg.sigma0) ? cfg.sigma0 : sigma;
    d.pinching = pinching_monitors(traj, sigma, sigma0, cfg.eps_grid);
    d.tso = tso_monitor(traj, 0, snaps.size() - 1);
    d.smoczyk = smoczyk_monitor(traj, 0, snaps.front().radii.incenter);
    d.speed_fit = speed_lowerbound_fit(traj);
    std::vector<RadiusReport> radii;
    for (const auto& s : snaps) radii.push_back(s.radii);
    d.geombound = geombound_check(radii, cfg.rho_grid);

    std::vector<double> grad(snaps.size(), nan_value);
    std::vector<char> grad_ok(snaps.size(), 1);
    if (cfg.gradient && n == 2)
        parallel_for(snaps.size(), [&](std::size_t i) {
            const auto g = gradient_inequality_monitor(snaps[i].body, curvature(snaps[i].body));
            const double scale = std::max(g.grad_A_max, 1e-300);
            grad[i] = std::min(g.norm_margin, g.traceless_margin) / scale;
            grad_ok[i] = g.inconclusive || g.passed();
        });
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        DiagnosticsRecord r;
        r.t = snaps[i].t;
        r.pinch_max = d.pinching.rows[i].pinch_max;
        r.Z_sigma_max = d.pinching.rows[i].Z_sigma_max;
        if (!d.tso.aborted && i < d.tso.rows.size()) {
            r.Q_max = d.tso.rows[i].Q_max;
            r.Q_bound = d.tso.rows[i].bound;
        }
        r.smoczyk_min = d.smoczyk.margins[i].second;
        r.F_min = snaps[i].summary.F_min;
        r.F_max = snaps[i].summary.F_max;
        r.H_max = snaps[i].summary.H_max;
        r.gradient_margin = grad[i];
        r.lambda_hat = d.pinching.lambda_hat;
        r.speed_exponent = d.speed_fit.slope;
        if (std::isfinite(grad[i])) d.gradient_worst = std::isfinite(d.gradient_worst) ? std::min(d.gradient_worst, grad[i]) : grad[i];
        d.gradient_passed = d.gradient_passed && grad_ok[i];
        d.records.push_back(r);
    }
    return d;
}

} // namespace curvflow
