#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curvflow/flow_engine.hpp"
#include "curvflow/shapes.hpp"
#include "curvflow/snapshot_io.hpp"
#include "curvflow/verification.hpp"

namespace curvflow {

/// One simulation experiment, read from a JSON file and echoed into its output directory.
struct ExperimentConfig {
    int dimension = 2;
    std::string shape = "sphere 1";
    double perturbation = 0.0;    // amplitude of seeded random harmonics (degree 2..perturbation_degree)
    int perturbation_degree = 4;
    std::string speed = "pow_mean,alpha=2";
    int degree = 16;
    double c_safe = 0.2;
    bool dealias = true;
    double stop_fraction = 0.2;
    std::size_t max_steps = 200000;
    std::size_t cadence = 10;
    double end_time = std::numeric_limits<double>::infinity();
    double max_dt = std::numeric_limits<double>::infinity();
    MonitorConfig monitors;
    std::string output = "out";
    std::uint64_t seed = 1;

    FlowConfig flow() const {
        FlowConfig f;
        f.speed = parse_speed(speed, dimension);
        f.degree = degree;
        f.c_safe = c_safe;
        f.dealias = dealias;
        f.stop_fraction = stop_fraction;
        f.max_steps = max_steps;
        f.cadence = cadence;
        f.end_time = end_time;
        f.max_dt = max_dt;
        f.validate();
        return f;
    }
};

namespace detail {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline double number_or(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<double>();
}

} // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json m;
    m["sigma"] = detail::finite_or_null(c.monitors.sigma);
    m["sigma0"] = detail::finite_or_null(c.monitors.sigma0);
    m["eps_grid"] = c.monitors.eps_grid;
    m["rho_grid"] = c.monitors.rho_grid;
    m["gradient"] = c.monitors.gradient;
    nlohmann::json j;
    j["dimension"] = c.dimension;
    j["shape"] = c.shape;
    j["perturbation"] = c.perturbation;
    j["perturbation_degree"] = c.perturbation_degree;
    j["speed"] = c.speed;
    j["degree"] = c.degree;
    j["c_safe"] = c.c_safe;
    j["dealias"] = c.dealias;
    j["stop_fraction"] = c.stop_fraction;
    j["max_steps"] = c.max_steps;
    j["cadence"] = c.cadence;
    j["end_time"] = detail::finite_or_null(c.end_time);
    j["max_dt"] = detail::finite_or_null(c.max_dt);
    j["monitors"] = m;
    j["output"] = c.output;
    j["seed"] = c.seed;
    return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {"dimension", "shape", "perturbation", "perturbation_degree", "speed",
                                                   "degree", "c_safe", "dealias", "stop_fraction", "max_steps", "cadence",
                                                   "end_time", "max_dt", "monitors", "output", "seed"};
    if (!j.is_object()) throw PreconditionError("experiment config must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw PreconditionError("unknown config key '" + key + "'");
    ExperimentConfig c;
    try {
        c.dimension = j.value("dimension", c.dimension);
        c.shape = j.value("shape", c.shape);
        c.perturbation = j.value("perturbation", c.perturbation);
        c.perturbation_degree = j.value("perturbation_degree", c.perturbation_degree);
        c.speed = j.value("speed", c.speed);
        c.degree = j.value("degree", c.degree);
        c.c_safe = j.value("c_safe", c.c_safe);
        c.dealias = j.value("dealias", c.dealias);
        c.stop_fraction = j.value("stop_fraction", c.stop_fraction);
        c.max_steps = j.value("max_steps", c.max_steps);
        c.cadence = j.value("cadence", c.cadence);
        c.end_time = detail::number_or(j, "end_time", c.end_time);
        c.max_dt = detail::number_or(j, "max_dt", c.max_dt);
        c.output = j.value("output", c.output);
        c.seed = j.value("seed", c.seed);
        if (j.contains("monitors")) {
            const auto& m = j.at("monitors");
            c.monitors.sigma = detail::number_or(m, "sigma", c.monitors.sigma);
            c.monitors.sigma0 = detail::number_or(m, "sigma0", c.monitors.sigma0);
            c.monitors.eps_grid = m.value("eps_grid", c.monitors.eps_grid);
            c.monitors.rho_grid = m.value("rho_grid", c.monitors.rho_grid);
            c.monitors.gradient = m.value("gradient", c.monitors.gradient);
        }
    } catch (const nlohmann::json::exception& e) {
        throw PreconditionError(std::string("bad config value: ") + e.what());
    }
    if (c.dimension != 1 && c.dimension != 2) throw PreconditionError("dimension must be 1 or 2");
    if (c.perturbation < 0.0) throw PreconditionError("perturbation amplitude must be non-negative");
    if (c.perturbation_degree < 2) throw PreconditionError("perturbation degree must be at least 2");
    return c;
}

inline ExperimentConfig read_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

/// Sphere-like seeded random harmonics of degree 2..max_degree with amplitude a / l^2.
inline SupportFunction add_random_harmonics(const SupportFunction& body, double amplitude, int max_degree,
                                            std::uint64_t seed) {
    if (amplitude == 0.0) return body;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<HarmonicTerm> terms;
    const int n = body.dimension();
    for (int l = 2; l <= std::min(max_degree, body.degree()); ++l) {
        const double a = amplitude / (l * l);
        if (n == 1) {
            terms.push_back({l, 0, a * normal(rng)});
            terms.push_back({l, 1, a * normal(rng)});
        } else {
            for (int m = -l; m <= l; ++m) terms.push_back({l, m, a * normal(rng)});
        }
    }
    return add_harmonics(body, terms);
}

/// The configured initial body, before any admissibility check.
inline SupportFunction initial_body(const ExperimentConfig& c) {
    return add_random_harmonics(build_shape(c.shape, c.dimension, c.degree), c.perturbation, c.perturbation_degree, c.seed);
}

struct AdmissibilityReport {
    bool convex = true;
    bool in_cone = true;
    double pinch_max = 0.0;
    std::size_t worst_node = 0;
    Eigen::Vector3d worst_normal = Eigen::Vector3d::Zero();
    std::string message;
};

/// Convexity and cone membership of a body for a speed.
inline AdmissibilityReport check_admissible(const SupportFunction& body, const SpeedSpec& speed) {
    AdmissibilityReport r;
    try {
        const CurvatureField c = curvature(body);
        const PinchingReport p = pinching_status(c, speed.delta0);
        r.pinch_max = p.max_ratio;
        r.worst_node = p.worst_node;
        r.in_cone = p.inside;
        if (!r.in_cone)
            r.message = "outside the cone: |A°|^2/H^2 = " + std::to_string(p.max_ratio) + " >= delta0 = " + std::to_string(speed.delta0);
    } catch (const ConvexityLost& e) {
        r.convex = r.in_cone = false;
        r.worst_node = e.node();
        r.message = e.what();
    } catch (const ConeExit& e) {
        r.in_cone = false;
        r.worst_node = e.node();
        r.message = e.what();
    }
    r.worst_normal = body.grid().nodes()[r.worst_node];
    return r;
}

// ---------------------------------------------------------------------------
// Time series

struct TimeSeriesRow {
    double t = 0.0;
    double r_minus = 0.0, r_plus = 0.0, ratio = 0.0;
    std::vector<double> V; // V_1 .. V_{n+1}
    double iso_ratio = 0.0;
    double H_max = 0.0, F_min = 0.0, F_max = 0.0;
    double pinch_max = 0.0, Z_sigma_max = 0.0, Q_max = nan_value, smoczyk_min = nan_value;
};

inline std::vector<TimeSeriesRow> time_series(const Trajectory& traj, const TrajectoryDiagnostics& d) {
    std::vector<TimeSeriesRow> rows;
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        const auto& s = traj.snapshots[i];
        const auto& r = d.records[i];
        TimeSeriesRow row;
        row.t = s.t;
        row.r_minus = s.radii.r_minus;
        row.r_plus = s.radii.r_plus;
        row.ratio = s.radii.ratio;
        row.V.assign(s.volumes.V.begin() + 1, s.volumes.V.end());
        row.iso_ratio = s.volumes.iso_ratio;
        row.H_max = s.summary.H_max;
        row.F_min = s.summary.F_min;
        row.F_max = s.summary.F_max;
        row.pinch_max = r.pinch_max;
        row.Z_sigma_max = r.Z_sigma_max;
        row.Q_max = r.Q_max;
        row.smoczyk_min = r.smoczyk_min;
        rows.push_back(row);
    }
    return rows;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_line(const std::vector<double>& values) {
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) line += ',';
        line += format_double(values[i]);
    }
    return line + '\n';
}

inline std::string time_series_csv(const std::vector<TimeSeriesRow>& rows, int dimension) {
    std::string out = "t,r_minus,r_plus,ratio";
    for (int k = 1; k <= dimension + 1; ++k) out += ",V_" + std::to_string(k);
    out += ",iso_ratio,H_max,F_min,F_max,pinch_max,Z_sigma_max,Q_max,smoczyk_min\n";
    for (const auto& r : rows) {
        std::vector<double> v = {r.t, r.r_minus, r.r_plus, r.ratio};
        v.insert(v.end(), r.V.begin(), r.V.end());
        v.insert(v.end(), {r.iso_ratio, r.H_max, r.F_min, r.F_max, r.pinch_max, r.Z_sigma_max, r.Q_max, r.smoczyk_min});
        out += csv_line(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory directories

inline std::string snapshot_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "snap_%05zu.json", index);
    return buf;
}

/// Writes config.json, trajectory.json and snapshots/ into `dir`.
inline void write_trajectory(const std::filesystem::path& dir, const ExperimentConfig& cfg, const Trajectory& traj) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "snapshots", ec);
    if (ec) throw IoError("cannot create " + (dir / "snapshots").string() + ": " + ec.message());
    write_text_file(dir / "config.json", to_json(cfg).dump(2) + "\n");
    nlohmann::json meta;
    meta["status"] = to_string(traj.status);
    meta["message"] = traj.message;
    meta["steps"] = traj.steps;
    meta["c_f"] = traj.c_f;
    meta["alpha"] = traj.alpha;
    meta["T_hat"] = detail::finite_or_null(traj.T_hat);
    meta["p_hat"] = {traj.p_hat.x(), traj.p_hat.y(), traj.p_hat.z()};
    nlohmann::json snaps = nlohmann::json::array();
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        const auto& s = traj.snapshots[i];
        write_snapshot(dir / "snapshots" / snapshot_name(i), s.body.field(), s.t);
        snaps.push_back({{"file", snapshot_name(i)}, {"t", s.t}, {"step", s.step}});
    }
    meta["snapshots"] = snaps;
    write_text_file(dir / "trajectory.json", meta.dump(2) + "\n");
}

struct LoadedExperiment {
    ExperimentConfig config;
    Trajectory trajectory;
};

/// Rebuilds a trajectory (with curvature summaries and radii) from a directory written by write_trajectory.
inline LoadedExperiment load_trajectory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("no trajectory directory at " + dir.string());
    if (!std::filesystem::exists(dir / "trajectory.json")) throw IoError("no trajectory.json in " + dir.string());
    LoadedExperiment out;
    out.config = read_config(dir / "config.json");
    const FlowConfig fc = out.config.flow();
    const nlohmann::json meta = read_json_file(dir / "trajectory.json");
    Trajectory& tr = out.trajectory;
    tr.speed = fc.speed;
    try {
        const std::string status = meta.at("status").get<std::string>();
        for (FlowStatus s : {FlowStatus::running, FlowStatus::extinction_threshold, FlowStatus::end_time,
                             FlowStatus::step_budget, FlowStatus::cone_exit, FlowStatus::step_failure})
            if (status == to_string(s)) tr.status = s;
        tr.message = meta.at("message").get<std::string>();
        tr.steps = meta.at("steps").get<std::size_t>();
        tr.c_f = meta.at("c_f").get<double>();
        tr.alpha = meta.at("alpha").get<double>();
        tr.T_hat = detail::number_or(meta, "T_hat", nan_value);
        const auto p = meta.at("p_hat").get<std::vector<double>>();
        if (p.size() != 3) throw IoError("p_hat needs three components");
        tr.p_hat = Eigen::Vector3d(p[0], p[1], p[2]);
        const auto grid = shared_grid(out.config.dimension, fc.evaluation_degree());
        const auto& list = meta.at("snapshots");
        if (list.empty()) throw IoError("trajectory has no snapshots");
        for (const auto& entry : list) {
            const Snapshot snap = read_snapshot(dir / "snapshots" / entry.at("file").get<std::string>());
            if (snap.field.dimension != out.config.dimension || snap.field.degree != fc.degree)
                throw IoError("snapshot does not match the configured dimension and degree");
            const SupportFunction body(snap.field, grid);
            tr.snapshots.push_back(make_snapshot(body, snap.time, entry.at("step").get<std::size_t>(),
                                                 flow_rhs(body, fc.speed, fc.degree)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed trajectory.json: ") + e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands

struct ShapeResult {
    AdmissibilityReport admissibility;
    double pinch_max = 0.0;
};

/// Builds the shape, writes it as a snapshot and reports its pinching; throws ConeExit when rejected.
inline ShapeResult cmd_shape(const std::string& spec, int dimension, int degree, const std::string& speed,
                             const std::filesystem::path& out, std::ostream& log) {
    const SupportFunction body = build_shape(spec, dimension, degree);
    const SpeedSpec s = parse_speed(speed, dimension);
    ShapeResult r;
    r.admissibility = check_admissible(body, s);
    r.pinch_max = r.admissibility.pinch_max;
    const auto& a = r.admissibility;
    if (!a.convex || !a.in_cone) {
        log << "rejected: " << a.message << "\n  worst node " << a.worst_node << " normal (" << a.worst_normal.x() << ", "
            << a.worst_normal.y() << ", " << a.worst_normal.z() << ")\n";
        throw ConeExit("shape '" + spec + "' is not admissible: " + a.message, a.worst_node, a.pinch_max);
    }
    write_snapshot(out, body.field(), 0.0);
    log << "shape: " << spec << "\npinch_max: " << format_double(a.pinch_max)
        << "\ncone margin: " << format_double(s.delta0 - a.pinch_max) << " (delta0 " << format_double(s.delta0) << ")\n"
        << "written: " << out.string() << '\n';
    return r;
}

inline ExitCode exit_code(FlowStatus s) {
    switch (s) {
    case FlowStatus::cone_exit: return ExitCode::cone_exit;
    case FlowStatus::step_failure: return ExitCode::numerical;
    default: return ExitCode::ok;
    }
}

struct SimulationResult {
    Trajectory trajectory;
    TrajectoryDiagnostics diagnostics;
    ExitCode code = ExitCode::ok;
};

/// Runs one configured experiment and writes config echo, snapshots, timeseries.csv and diagnostics.json.
inline SimulationResult cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
    const FlowConfig fc = cfg.flow();
    const SupportFunction body = initial_body(cfg);
    const AdmissibilityReport a = check_admissible(prepare_state(body, fc), fc.speed);
    if (!a.convex || !a.in_cone) throw ConeExit("initial body is not admissible: " + a.message, a.worst_node, a.pinch_max);

    SimulationResult r;
    r.trajectory = run(body, fc);
    r.diagnostics = diagnose(r.trajectory, cfg.monitors);
    r.code = exit_code(r.trajectory.status);
    const std::filesystem::path dir = cfg.output;
    write_trajectory(dir, cfg, r.trajectory);
    write_text_file(dir / "timeseries.csv", time_series_csv(time_series(r.trajectory, r.diagnostics), cfg.dimension));
    const auto& tr = r.trajectory;
    log << cfg.output << ": " << to_string(tr.status) << " after " << tr.steps << " steps, " << tr.snapshots.size()
        << " snapshots, T_hat = " << format_double(tr.T_hat) << '\n';
    if (!tr.message.empty()) log << "  " << tr.message << '\n';
    return r;
}

struct Verdict {
    std::string check;
    bool passed = true;
    std::string detail;
};

inline nlohmann::json verdicts_json(const std::vector<Verdict>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& x : v) out.push_back({{"check", x.check}, {"passed", x.passed}, {"detail", x.detail}});
    return out;
}

inline bool all_passed(const std::vector<Verdict>& v) {
    return std::all_of(v.begin(), v.end(), [](const Verdict& x) { return x.passed; });
}

inline std::vector<Verdict> verify_lemmas(std::size_t samples) {
    std::vector<Verdict> out;
    for (const auto& r : run_lemma_suites(samples))
        out.push_back({r.lemma + " n=" + std::to_string(r.dimension), r.passed(),
                       std::to_string(r.samples) + " samples, " + std::to_string(r.violations) + " violations, worst margin "
                           + format_double(r.worst_margin)});
    return out;
}

inline std::vector<Verdict> verify_speed(const SpeedSpec& spec, std::size_t samples, std::uint64_t seed) {
    std::vector<Verdict> out;
    const auto c = check_conditions(spec, samples, seed);
    std::string failures;
    for (const auto& f : c.failures) failures += (failures.empty() ? "" : ", ") + f.condition;
    out.push_back({spec.describe() + " n=" + std::to_string(spec.dimension) + " conditions", c.passed(),
                   "gradient error " + format_double(c.max_gradient_error) + ", euler error " + format_double(c.max_euler_error)
                       + (failures.empty() ? "" : ", failed: " + failures)});
    const auto mu = estimate_mu(spec, std::max<std::size_t>(1, samples / 100), seed + 1);
    const auto b = verify_derivative_bounds(spec, mu.mu, samples, seed + 2);
    out.push_back({spec.describe() + " n=" + std::to_string(spec.dimension) + " derivative bounds", b.passed(),
                   "mu_hat " + format_double(mu.mu) + ", dF violations " + std::to_string(b.dF_violations)
                       + ", F violations " + std::to_string(b.F_violations_taylor)});
    return out;
}

/// Pass/fail checks of a trajectory's monitors.
inline std::vector<Verdict> flow_verdicts(const Trajectory& traj, const TrajectoryDiagnostics& d) {
    std::vector<Verdict> out;
    double worst_Z = -std::numeric_limits<double>::infinity();
    for (const auto& row : d.pinching.rows) worst_Z = std::max(worst_Z, row.Z_sigma_max / std::max(row.Z_tolerance, 1e-300));
    out.push_back({"pinching preserved", d.pinching.Z_preserved,
                   "sigma " + format_double(d.pinching.sigma) + ", max Z_sigma / tolerance " + format_double(worst_Z)});
    out.push_back({"tso bound", d.tso.passed(),
                   d.tso.aborted ? d.tso.witness : std::to_string(d.tso.violations) + " violations"});
    out.push_back({"smoczyk margin", d.smoczyk.min_margin >= -1e-8, "min " + format_double(d.smoczyk.min_margin)});
    if (traj.speed.dimension == 2)
        out.push_back({"gradient inequalities", d.gradient_passed, "worst normalised margin " + format_double(d.gradient_worst)});
    if (traj.snapshots.size() >= 3) {
        const auto v = volume_decay_check(traj);
        out.push_back({"volume decay", v.max_relative_error <= 0.01, "max relative error " + format_double(v.max_relative_error)});
    }
    bool monotone = true;
    for (std::size_t i = 1; i < traj.snapshots.size(); ++i) {
        const auto& a = traj.snapshots[i - 1];
        const auto& b = traj.snapshots[i];
        monotone = monotone && b.radii.r_plus < a.radii.r_plus && b.volumes.V.back() < a.volumes.V.back();
    }
    out.push_back({"monotone containment", monotone, ""});
    out.push_back({"trajectory status", traj.ok(), to_string(traj.status)});
    return out;
}

/// Per-snapshot monitor values.
inline std::string diagnostics_csv(const TrajectoryDiagnostics& d) {
    std::string out = "t,pinch_max,Z_sigma_max,Q_max,Q_bound,smoczyk_min,F_min,F_max,H_max,gradient_margin,lambda_hat,speed_exponent\n";
    for (const auto& r : d.records)
        out += csv_line({r.t, r.pinch_max, r.Z_sigma_max, r.Q_max, r.Q_bound, r.smoczyk_min, r.F_min, r.F_max, r.H_max,
                         r.gradient_margin, r.lambda_hat, r.speed_exponent});
    return out;
}

struct AnalysisResult {
    TrajectoryDiagnostics diagnostics;
    nlohmann::json summary;
};

/// Integral-geometry rows, the C2(rho) and C1(eps) tables, lambda-hat and the speed fit.
inline AnalysisResult cmd_analyze(const std::filesystem::path& dir, const std::vector<double>& rho_grid,
                                  const std::vector<double>& eps_grid, const std::filesystem::path& out_dir,
                                  std::ostream& log) {
    const LoadedExperiment e = load_trajectory(dir);
    MonitorConfig mc = e.config.monitors;
    mc.rho_grid = rho_grid;
    mc.eps_grid = eps_grid;
    mc.gradient = false;
    AnalysisResult r;
    r.diagnostics = diagnose(e.trajectory, mc);
    const auto& d = r.diagnostics;
    const int n = e.config.dimension;

    std::string geometry = "t,r_minus,r_plus,ratio,diskant_lower,diskant_upper";
    for (int k = 1; k <= n + 1; ++k) geometry += ",V_" + std::to_string(k);
    geometry += ",iso_ratio\n";
    for (const auto& s : e.trajectory.snapshots) {
        std::vector<double> v = {s.t, s.radii.r_minus, s.radii.r_plus, s.radii.ratio, s.radii.diskant_lower, s.radii.diskant_upper};
        v.insert(v.end(), s.volumes.V.begin() + 1, s.volumes.V.end());
        v.push_back(s.volumes.iso_ratio);
        geometry += csv_line(v);
    }
    std::string c2 = "rho,C2,violations,below\n";
    for (const auto& row : d.geombound.rows)
        c2 += format_double(row.rho) + ',' + format_double(row.C2) + ',' + std::to_string(row.violations) + ','
              + std::to_string(row.below) + '\n';
    std::string c1 = "eps,C1\n";
    for (const auto& [eps, C] : d.pinching.C1) c1 += csv_line({eps, C});

    nlohmann::json& s = r.summary;
    s["lambda_hat"] = detail::finite_or_null(d.pinching.lambda_hat);
    s["lambda_available"] = d.pinching.lambda_available;
    s["speed_fit"] = {{"available", d.speed_fit.available}, {"slope", detail::finite_or_null(d.speed_fit.slope)},
                      {"intercept", detail::finite_or_null(d.speed_fit.intercept)},
                      {"expected", -e.trajectory.alpha / (1.0 + e.trajectory.alpha)}, {"points", d.speed_fit.points}};
    s["T_hat"] = detail::finite_or_null(e.trajectory.T_hat);
    nlohmann::json table = nlohmann::json::array();
    for (const auto& row : d.geombound.rows)
        table.push_back({{"rho", row.rho}, {"C2", detail::finite_or_null(row.C2)}, {"finite", std::isfinite(row.C2)},
                         {"violations", row.violations}, {"below", row.below}});
    s["C2"] = table;
    s["C2_monotone"] = d.geombound.monotone;
    nlohmann::json c1j = nlohmann::json::array();
    for (const auto& [eps, C] : d.pinching.C1) c1j.push_back({{"eps", eps}, {"C1", C}});
    s["C1"] = c1j;

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    write_text_file(out_dir / "geometry.csv", geometry);
    write_text_file(out_dir / "geombound.csv", c2);
    write_text_file(out_dir / "pinching_c1.csv", c1);
    write_text_file(out_dir / "analysis.json", s.dump(2) + "\n");
    log << "lambda_hat: " << (d.pinching.lambda_available ? format_double(d.pinching.lambda_hat) : "unavailable") << '\n'
        << "speed exponent: " << (d.speed_fit.available ? format_double(d.speed_fit.slope) : "unavailable") << '\n';
    for (const auto& row : d.geombound.rows)
        log << "C2(" << format_double(row.rho) << "): " << (std::isfinite(row.C2) ? format_double(row.C2) : "inf") << '\n';
    return r;
}

} // namespace curvflow
