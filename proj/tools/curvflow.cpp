#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <iostream>
#include <sstream>
#include <thread>

#include "curvflow/experiment.hpp"

using namespace curvflow;

namespace {

int code(ExitCode c) { return static_cast<int>(c); }

/// Runs each config on a pool of `jobs` workers; logs are printed in config order.
int simulate_all(const std::vector<std::string>& configs, const std::string& output_override, unsigned jobs) {
    std::vector<ExperimentConfig> parsed;
    for (const auto& path : configs) {
        ExperimentConfig c = read_config(path);
        if (!output_override.empty()) c.output = output_override;
        parsed.push_back(c);
    }
    std::vector<std::string> logs(parsed.size());
    std::vector<int> codes(parsed.size(), 0);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < parsed.size(); i = next++) {
            std::ostringstream log;
            try {
                codes[i] = code(cmd_simulate(parsed[i], log).code);
            } catch (const Error& e) {
                log << configs[i] << ": error: " << e.what() << '\n';
                codes[i] = code(e.code());
            } catch (const std::exception& e) {
                log << configs[i] << ": error: " << e.what() << '\n';
                codes[i] = code(ExitCode::numerical);
            }
            logs[i] = log.str();
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(parsed.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& l : logs) std::cout << l;
    return *std::max_element(codes.begin(), codes.end());
}

int report(const std::vector<Verdict>& verdicts, const std::string& path) {
    for (const auto& v : verdicts)
        std::cout << (v.passed ? "PASS " : "FAIL ") << v.check << (v.detail.empty() ? "" : ": " + v.detail) << '\n';
    nlohmann::json j;
    j["passed"] = all_passed(verdicts);
    j["checks"] = verdicts_json(verdicts);
    if (!path.empty()) write_text_file(path, j.dump(2) + "\n");
    return all_passed(verdicts) ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Support-function simulator for curvature contraction flows of convex bodies"};
    app.require_subcommand(1);

    auto* shape = app.add_subcommand("shape", "Build an initial body and write it as a snapshot");
    std::string shape_spec, shape_speed = "pow_mean,alpha=2", shape_out = "shape.json";
    int shape_dim = 2, shape_degree = 16;
    shape->add_option("spec", shape_spec, "sphere R | ellipsoid a b [c] | snapshot PATH, then + Y(l,m)*amp terms")->required();
    shape->add_option("-n,--dimension", shape_dim, "Sphere dimension (1 or 2)")->check(CLI::IsMember({1, 2}));
    shape->add_option("-L,--degree", shape_degree, "Spectral degree");
    shape->add_option("--speed", shape_speed, "Speed whose cone the body must lie in");
    shape->add_option("-o,--output", shape_out, "Snapshot file");

    auto* sim = app.add_subcommand("simulate", "Run experiments from JSON configs");
    std::vector<std::string> sim_configs;
    std::string sim_output;
    unsigned jobs = 1;
    sim->add_option("configs", sim_configs, "Config files")->required()->check(CLI::ExistingFile);
    sim->add_option("-o,--output", sim_output, "Override the output directory (single config only)");
    sim->add_option("-j,--jobs", jobs, "Configs run concurrently")->check(CLI::PositiveNumber);

    auto* verify = app.add_subcommand("verify", "Run verification suites");
    verify->require_subcommand(1);
    std::string report_path;
    verify->add_option("--report", report_path, "Write a JSON pass/fail report");
    auto* v_lemmas = verify->add_subcommand("lemmas", "Curvature inequality suites for n = 2, 3, 4");
    std::size_t lemma_samples = 100000;
    v_lemmas->add_option("--samples", lemma_samples, "Samples per suite and dimension");
    auto* v_speeds = verify->add_subcommand("speeds", "Structural conditions and derivative bounds of speeds");
    std::vector<std::string> speed_specs;
    std::vector<int> speed_dims = {2, 3};
    std::size_t speed_samples = 20000;
    std::uint64_t speed_seed = 1;
    v_speeds->add_option("speeds", speed_specs, "Speed grammars (default: all built-ins at alpha 1.5, 2, 3)");
    v_speeds->add_option("-n,--dimension", speed_dims, "Dimensions")->check(CLI::PositiveNumber);
    v_speeds->add_option("--samples", speed_samples, "Samples per speed");
    v_speeds->add_option("--seed", speed_seed, "Sampling seed");
    auto* v_flow = verify->add_subcommand("flow", "Monitors of a simulated trajectory");
    std::string flow_dir;
    v_flow->add_option("dir", flow_dir, "Trajectory directory")->required();

    auto* analyze = app.add_subcommand("analyze", "Geometry report of a simulated trajectory");
    std::string analyze_dir, analyze_out;
    std::vector<double> rho_grid = {0.01, 0.05}, eps_grid = {0.01, 0.05, 0.1};
    analyze->add_option("dir", analyze_dir, "Trajectory directory")->required();
    analyze->add_option("--rho", rho_grid, "Radius-ratio excess grid");
    analyze->add_option("--eps", eps_grid, "Curvature-ratio excess grid");
    analyze->add_option("-o,--output", analyze_out, "Output directory (default: DIR/analysis)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : code(ExitCode::precondition);
    }

    try {
        if (*shape) {
            cmd_shape(shape_spec, shape_dim, shape_degree, shape_speed, shape_out, std::cout);
            return 0;
        }
        if (*sim) {
            if (!sim_output.empty() && sim_configs.size() > 1)
                throw PreconditionError("--output needs a single config");
            return simulate_all(sim_configs, sim_output, jobs);
        }
        if (*v_lemmas) return report(verify_lemmas(lemma_samples), report_path);
        if (*v_speeds) {
            std::vector<Verdict> all;
            for (int n : speed_dims) {
                std::vector<SpeedSpec> specs;
                if (speed_specs.empty()) {
                    for (double a : {1.5, 2.0, 3.0})
                        for (const std::string& name : {"pow_mean", "pow_Ek:2", "pow_gauss", "pow_norm"})
                            specs.push_back(parse_speed(name + ",alpha=" + format_double(a), n));
                } else {
                    for (const auto& s : speed_specs) specs.push_back(parse_speed(s, n));
                }
                for (const auto& s : specs) {
                    const auto v = verify_speed(s, speed_samples, speed_seed);
                    all.insert(all.end(), v.begin(), v.end());
                }
            }
            return report(all, report_path);
        }
        if (*v_flow) {
            const LoadedExperiment e = load_trajectory(flow_dir);
            const auto d = diagnose(e.trajectory, e.config.monitors);
            write_text_file(std::filesystem::path(flow_dir) / "diagnostics.csv", diagnostics_csv(d));
            return report(flow_verdicts(e.trajectory, d),
                          report_path.empty() ? (std::filesystem::path(flow_dir) / "verify.json").string() : report_path);
        }
        if (*analyze) {
            const std::filesystem::path out = analyze_out.empty() ? std::filesystem::path(analyze_dir) / "analysis" : std::filesystem::path(analyze_out);
            cmd_analyze(analyze_dir, rho_grid, eps_grid, out, std::cout);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return code(ExitCode::numerical);
    }
    return 0;
}
