#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "curvflow/convex_body.hpp"
#include "curvflow/integral_geometry.hpp"
#include "curvflow/parallel.hpp"
#include "curvflow/speeds.hpp"

namespace curvflow {

struct FlowConfig {
    SpeedSpec speed;
    int degree = 16;
    double c_safe = 0.2;
    bool dealias = true;
    double stop_fraction = 0.2;   // stop once r_- < stop_fraction * r_-(0)
    std::size_t max_steps = 200000;
    std::size_t cadence = 10;     // snapshot every `cadence` accepted steps
    double end_time = std::numeric_limits<double>::infinity();
    double max_dt = std::numeric_limits<double>::infinity();

    void validate() const {
        if (!(c_safe > 0.0 && c_safe < 1.0)) throw PreconditionError("c_safe must lie in (0, 1)");
        if (!(stop_fraction > 0.0 && stop_fraction < 1.0)) throw PreconditionError("stop fraction must lie in (0, 1)");
        if (degree < 2) throw ResolutionError("flow needs degree >= 2");
        if (cadence == 0) throw PreconditionError("snapshot cadence must be positive");
        if (!(max_dt > 0.0)) throw PreconditionError("max_dt must be positive");
        if (!speed.f) throw PreconditionError("flow config has no speed");
    }

    /// Grid on which F is evaluated: twice the degree when dealiasing.
    int evaluation_degree() const { return dealias ? 2 * degree : degree; }
};

enum class FlowStatus { running, extinction_threshold, end_time, step_budget, cone_exit, step_failure };

inline const char* to_string(FlowStatus s) {
    switch (s) {
    case FlowStatus::running: return "running";
    case FlowStatus::extinction_threshold: return "extinction_threshold";
    case FlowStatus::end_time: return "end_time";
    case FlowStatus::step_budget: return "step_budget";
    case FlowStatus::cone_exit: return "cone_exit";
    case FlowStatus::step_failure: return "step_failure";
    }
    return "unknown";
}

/// Per-snapshot curvature digest.
struct CurvatureSummary {
    double H_min = 0.0, H_max = 0.0;
    double F_min = 0.0, F_max = 0.0;
    double pinch_max = 0.0;   // max ||A°||^2 / H^2
    double volume_rate = 0.0; // -((n+1)/|S^n|) int F det R
};

struct FlowSnapshot {
    double t = 0.0;
    std::size_t step = 0;
    SupportFunction body;
    CurvatureSummary summary;
    RadiusReport radii;
    MixedVolumes volumes;
};

struct Trajectory {
    std::vector<FlowSnapshot> snapshots;
    FlowStatus status = FlowStatus::running;
    std::string message;
    std::size_t steps = 0;
    SpeedSpec speed;
    double c_f = 1.0;
    double alpha = 2.0;
    double T_hat = std::numeric_limits<double>::quiet_NaN();
    Eigen::Vector3d p_hat = Eigen::Vector3d::Zero();

    bool ok() const { return status != FlowStatus::cone_exit && status != FlowStatus::step_failure; }
    /// Sphere radius with lifetime T_hat - t.
    double R(double t) const { return std::pow((1.0 + alpha) * c_f * (T_hat - t), 1.0 / (1.0 + alpha)); }
};

/// Speed values on the evaluation grid and the projected right-hand side ds/dt = -F.
struct FlowRhs {
    SpectralField dsdt;
    CurvatureField curvature;
    std::vector<double> F;
    double stiffness = 0.0; // max over nodes of trace(F') max(1, r_max^2) / r_min^2
};

inline FlowRhs flow_rhs(const SupportFunction& body, const SpeedSpec& speed, int degree) {
    FlowRhs out;
    out.curvature = curvature(body);
    const CurvatureField& c = out.curvature;
    const std::size_t N = c.size();
    out.F.resize(N);
    std::vector<double> stiff(N), neg(N);
    parallel_for(N, [&](std::size_t i) {
        const Kappa k = c.kappa_at(i);
        double g[2];
        speed.df(k, std::span<double>(g, k.size()));
        out.F[i] = speed.f(k);
        neg[i] = -out.F[i];
        const double trace = std::accumulate(g, g + k.size(), 0.0);
        const auto r = c.radii_at(i);
        const double rmax = r[0], rmin = r[r.size() - 1];
        stiff[i] = trace * std::max(1.0, rmax * rmax) / (rmin * rmin);
    });
    out.stiffness = *std::max_element(stiff.begin(), stiff.end());
    out.dsdt = truncate(analyze(neg, body.grid()), degree);
    return out;
}

inline CurvatureSummary summarize(const SupportFunction& body, const FlowRhs& rhs) {
    const CurvatureField& c = rhs.curvature;
    CurvatureSummary s;
    s.H_min = *std::min_element(c.H.begin(), c.H.end());
    s.H_max = *std::max_element(c.H.begin(), c.H.end());
    s.F_min = *std::min_element(rhs.F.begin(), rhs.F.end());
    s.F_max = *std::max_element(rhs.F.begin(), rhs.F.end());
    for (std::size_t i = 0; i < c.size(); ++i) s.pinch_max = std::max(s.pinch_max, c.traceless2[i] / (c.H[i] * c.H[i]));
    std::vector<double> fd(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) fd[i] = rhs.F[i] * c.det_R[i];
    const SphereGrid& g = body.grid();
    s.volume_rate = -(body.dimension() + 1) * integrate(fd, g) / g.measure();
    return s;
}

/// Largest stable step for the body: c_safe h_min^2 / stiffness.
inline double stable_dt(const FlowConfig& cfg, const FlowRhs& rhs, int dimension) {
    const double h = shared_grid(dimension, cfg.degree)->min_spacing();
    return std::min(cfg.max_dt, cfg.c_safe * h * h / rhs.stiffness);
}

struct StepResult {
    SupportFunction state;
    double t = 0.0;
    double dt = 0.0;
    int halvings = 0;
};

namespace detail {

inline SpectralField axpy(const SpectralField& x, double a, const SpectralField& y) {
    SpectralField out = x;
    for (std::size_t i = 0; i < out.coefficients.size(); ++i) out.coefficients[i] += a * y.coefficients[i];
    return out;
}

/// One RK4 step of size dt from a state whose stage-1 right-hand side is k1; throws ConvexityLost.
inline SupportFunction rk4(const SupportFunction& s, const SpectralField& k1, double dt, const FlowConfig& cfg) {
    const auto& grid = s.grid_ptr();
    const SupportFunction s2(axpy(s.field(), 0.5 * dt, k1), grid);
    const SpectralField k2 = flow_rhs(s2, cfg.speed, cfg.degree).dsdt;
    const SupportFunction s3(axpy(s.field(), 0.5 * dt, k2), grid);
    const SpectralField k3 = flow_rhs(s3, cfg.speed, cfg.degree).dsdt;
    const SupportFunction s4(axpy(s.field(), dt, k3), grid);
    const SpectralField k4 = flow_rhs(s4, cfg.speed, cfg.degree).dsdt;
    SpectralField next = s.field();
    for (std::size_t i = 0; i < next.coefficients.size(); ++i)
        next.coefficients[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    SupportFunction out(std::move(next), grid);
    curvature(out); // reject steps that end non-convex
    return out;
}

} // namespace detail

/// Brings a body onto the flow's representation: degree L on the evaluation grid.
inline SupportFunction prepare_state(const SupportFunction& body, const FlowConfig& cfg) {
    return SupportFunction(truncate(body.field(), cfg.degree), shared_grid(body.dimension(), cfg.evaluation_degree()));
}

/// One explicit RK4 step; dt is the stable step (capped by dt_cap) halved on convexity loss.
inline StepResult step(const SupportFunction& state, double t, const FlowConfig& cfg, const FlowRhs& rhs,
                       double dt_cap = std::numeric_limits<double>::infinity()) {
    double dt = std::min(stable_dt(cfg, rhs, state.dimension()), dt_cap);
    for (int halvings = 0; halvings <= 20; ++halvings, dt *= 0.5) {
        try {
            SupportFunction next = detail::rk4(state, rhs.dsdt, dt, cfg);
            return {std::move(next), t + dt, dt, halvings};
        } catch (const ConvexityLost&) {
        }
    }
    throw NumericalError("convexity lost after 20 step halvings at t = " + std::to_string(t));
}

inline StepResult step(const SupportFunction& state, double t, const FlowConfig& cfg) {
    return step(state, t, cfg, flow_rhs(state, cfg.speed, cfg.degree));
}

inline FlowSnapshot make_snapshot(const SupportFunction& body, double t, std::size_t step_index, const FlowRhs& rhs) {
    FlowSnapshot s{t, step_index, body, summarize(body, rhs), {}, mixed_volumes(body, rhs.curvature)};
    s.radii = radius_report(body, s.volumes);
    return s;
}

/// Least-squares T with r_-^{1+alpha} = (1+alpha) c_f (T - t) over the last `fraction` of snapshots.
inline double fit_final_time(const Trajectory& traj, double fraction = 0.2) {
    const auto& s = traj.snapshots;
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * s.size())));
    double acc = 0.0;
    for (std::size_t i = s.size() - count; i < s.size(); ++i)
        acc += s[i].t + std::pow(s[i].radii.r_minus, 1.0 + traj.alpha) / ((1.0 + traj.alpha) * traj.c_f);
    return acc / static_cast<double>(count);
}

/// Runs the flow until the inradius falls below the stop fraction, the end time, or the step budget.
inline Trajectory run(const SupportFunction& initial, const FlowConfig& cfg) {
    cfg.validate();
    if (cfg.speed.dimension != initial.dimension()) throw DimensionError("speed and body dimensions differ");
    Trajectory traj;
    traj.speed = cfg.speed;
    traj.c_f = cfg.speed.normalization();
    traj.alpha = cfg.speed.alpha;

    SupportFunction state = prepare_state(initial, cfg);
    const int n = state.dimension();
    double t = 0.0;
    const double r0 = detail::radius_lp(support_samples(state), n, 1.0).radius;
    std::size_t since_snapshot = 0;
    for (;;) {
        FlowRhs rhs;
        try {
            rhs = flow_rhs(state, cfg.speed, cfg.degree);
        } catch (const ConvexityLost& e) {
            traj.status = FlowStatus::step_failure;
            traj.message = e.what();
            break;
        }
        const PinchingReport pinch = pinching_status(rhs.curvature, cfg.speed.delta0);
        const double r_minus = detail::radius_lp(support_samples(state), n, 1.0).radius;
        FlowStatus stop = FlowStatus::running;
        if (!pinch.inside) stop = FlowStatus::cone_exit;
        else if (r_minus < cfg.stop_fraction * r0) stop = FlowStatus::extinction_threshold;
        else if (std::isfinite(cfg.end_time) && cfg.end_time - t <= 1e-12 * std::max(1.0, std::abs(cfg.end_time)))
            stop = FlowStatus::end_time;
        else if (traj.steps >= cfg.max_steps) stop = FlowStatus::step_budget;

        if (traj.snapshots.empty() || since_snapshot >= cfg.cadence || stop != FlowStatus::running) {
            traj.snapshots.push_back(make_snapshot(state, t, traj.steps, rhs));
            since_snapshot = 0;
        }
        if (stop != FlowStatus::running) {
            traj.status = stop;
            if (stop == FlowStatus::cone_exit)
                traj.message = "pinching ratio " + std::to_string(pinch.max_ratio) + " at node "
                               + std::to_string(pinch.worst_node) + " reached delta0 = " + std::to_string(cfg.speed.delta0);
            break;
        }
        try {
            StepResult r = step(state, t, cfg, rhs, cfg.end_time - t);
            state = std::move(r.state);
            t = r.t;
        } catch (const NumericalError& e) {
            traj.status = FlowStatus::step_failure;
            traj.message = e.what();
            break;
        }
        ++traj.steps;
        ++since_snapshot;
    }
    traj.T_hat = fit_final_time(traj);
    traj.p_hat = traj.snapshots.back().radii.incenter;
    return traj;
}

/// Support function normalised by the limit point and the sphere radius with the remaining lifetime.
struct RescaledSnapshot {
    double t = 0.0;
    double R = 0.0;
    std::vector<double> values; // s~ at the grid nodes
    double deviation = 0.0;     // max |s~ - 1|
};

inline RescaledSnapshot rescale(const Trajectory& traj, std::size_t index) {
    if (index >= traj.snapshots.size()) throw PreconditionError("snapshot index out of range");
    const FlowSnapshot& s = traj.snapshots[index];
    if (!(s.t < traj.T_hat)) throw PreconditionError("rescaling needs t < T_hat");
    RescaledSnapshot out;
    out.t = s.t;
    out.R = traj.R(s.t);
    const auto nodes = s.body.grid().nodes();
    const auto v = s.body.values();
    out.values.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.values[i] = (v[i] - traj.p_hat.dot(nodes[i])) / out.R;
        out.deviation = std::max(out.deviation, std::abs(out.values[i] - 1.0));
    }
    return out;
}

struct LimitPointReport {
    std::vector<double> drift; // |p_t - p_hat| / R(t) per snapshot (NaN where t >= T_hat)
    double late_max = 0.0;     // max over the second half of the snapshots
};

inline LimitPointReport limit_point_error(const Trajectory& traj) {
    LimitPointReport out;
    const std::size_t N = traj.snapshots.size();
    for (std::size_t i = 0; i < N; ++i) {
        const auto& s = traj.snapshots[i];
        const double d = s.t < traj.T_hat ? (s.radii.incenter - traj.p_hat).norm() / traj.R(s.t)
                                          : std::numeric_limits<double>::quiet_NaN();
        out.drift.push_back(d);
        if (2 * i >= N && std::isfinite(d)) out.late_max = std::max(out.late_max, d);
    }
    return out;
}

/// Central-difference dV_{n+1}/dt against the first-variation quadrature at interior snapshots.
struct VolumeDecayRow {
    double t = 0.0;
    double finite_difference = 0.0;
    double quadrature = 0.0;
    double relative_error = 0.0;
};

struct VolumeDecayReport {
    std::vector<VolumeDecayRow> rows;
    double max_relative_error = 0.0;
};

inline VolumeDecayReport volume_decay_check(const Trajectory& traj) {
    VolumeDecayReport out;
    const auto& s = traj.snapshots;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        const int n = s[i].volumes.dimension;
        const double h0 = s[i].t - s[i - 1].t, h1 = s[i + 1].t - s[i].t;
        const double v0 = s[i - 1].volumes.V[static_cast<std::size_t>(n + 1)];
        const double v1 = s[i].volumes.V[static_cast<std::size_t>(n + 1)];
        const double v2 = s[i + 1].volumes.V[static_cast<std::size_t>(n + 1)];
        // second-order derivative on a non-uniform stencil
        const double fd = (-h1 / (h0 * (h0 + h1))) * v0 + ((h1 - h0) / (h0 * h1)) * v1 + (h0 / (h1 * (h0 + h1))) * v2;
        VolumeDecayRow row{s[i].t, fd, s[i].summary.volume_rate, 0.0};
        row.relative_error = std::abs(fd - row.quadrature) / std::abs(row.quadrature);
        out.max_relative_error = std::max(out.max_relative_error, row.relative_error);
        out.rows.push_back(row);
    }
    return out;
}

} // namespace curvflow
