#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "curvflow/experiment.hpp"

using namespace curvflow;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() / (std::string("curvflow_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read_text_file(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

ExperimentConfig sphere_config(const fs::path& out) {
    ExperimentConfig c;
    c.shape = "sphere 1";
    c.degree = 10;
    c.output = out.string();
    return c;
}

} // namespace

TEST(ExperimentConfig, JsonRoundTripAndValidation) {
    ExperimentConfig c;
    c.shape = "ellipsoid 1 1 1.1";
    c.end_time = 0.5;
    c.monitors.sigma = 0.02;
    c.monitors.rho_grid = {0.02};
    c.seed = 42;
    const ExperimentConfig back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(back.end_time, 0.5);
    EXPECT_TRUE(std::isinf(config_from_json(nlohmann::json::object()).end_time));
    EXPECT_TRUE(std::isnan(back.monitors.sigma0));

    EXPECT_THROW(config_from_json({{"degre", 16}}), PreconditionError);
    EXPECT_THROW(config_from_json({{"dimension", 3}}), PreconditionError);
    EXPECT_THROW(config_from_json({{"degree", "many"}}), PreconditionError);
    ExperimentConfig bad;
    bad.speed = "pow_mean,alpha=0.5";
    EXPECT_THROW(bad.flow(), PreconditionError);
    bad.speed = "nonsense";
    EXPECT_THROW(bad.flow(), PreconditionError);
}

TEST(ExperimentConfig, SeededPerturbation) {
    ExperimentConfig c;
    c.perturbation = 0.1;
    c.seed = 3;
    const auto a = initial_body(c);
    const auto b = initial_body(c);
    EXPECT_EQ(a.field().coefficients, b.field().coefficients);
    c.seed = 4;
    EXPECT_NE(initial_body(c).field().coefficients, a.field().coefficients);
    c.perturbation = 0.0;
    EXPECT_EQ(initial_body(c).field().coefficients, make_sphere(2, 16, 1.0).field().coefficients);
}

TEST(CmdShape, WritesSnapshotAndRejectsOutOfCone) {
    TempDir dir;
    std::ostringstream log;
    const auto r = cmd_shape("ellipsoid 1 1 1.1", 2, 24, "pow_mean,alpha=2", dir.path() / "e.json", log);
    EXPECT_GT(r.pinch_max, 0.0);
    EXPECT_NE(log.str().find("pinch_max"), std::string::npos);
    const Snapshot snap = read_snapshot(dir.path() / "e.json");
    EXPECT_EQ(snap.field.coefficients, make_ellipsoid({1.0, 1.0, 1.1}, 24).field().coefficients);

    cmd_shape("sphere 1.0", 2, 8, "pow_mean,alpha=2", dir.path() / "s.json", log);
    const Snapshot s = read_snapshot(dir.path() / "s.json");
    EXPECT_EQ(s.field.coefficients, make_sphere(2, 8, 1.0).field().coefficients);

    EXPECT_THROW(cmd_shape("sphere 1.0 + Y(4,0)*0.01", 2, 16, "pow_mean,alpha=2,delta0=0.0005", dir.path() / "x.json", log),
                 ConeExit);
    EXPECT_FALSE(fs::exists(dir.path() / "x.json"));
    EXPECT_THROW(cmd_shape("sphere 1.0 + Y(4,0)*0.5", 2, 16, "pow_mean,alpha=2", dir.path() / "y.json", log), ConeExit);
}

TEST(CmdShape, SnapshotRoundTripThroughSimulation) {
    TempDir dir;
    std::ostringstream log;
    const auto spec = "ellipsoid 1 0.95 1.1 + Y(3,1)*0.01";
    cmd_shape(spec, 2, 12, "pow_mean,alpha=2", dir.path() / "shape.json", log);
    ExperimentConfig c;
    c.shape = "snapshot " + (dir.path() / "shape.json").string();
    c.degree = 12;
    const auto reread = initial_body(c);
    EXPECT_EQ(reread.field().coefficients, build_shape(spec, 2, 12).field().coefficients);
}

TEST(CmdSimulate, SphereCsvMatchesClosedForm) {
    TempDir dir;
    std::ostringstream log;
    const auto r = cmd_simulate(sphere_config(dir.path() / "run"), log);
    EXPECT_EQ(r.code, ExitCode::ok);
    for (const char* f : {"config.json", "trajectory.json", "timeseries.csv", "snapshots/snap_00000.json"})
        EXPECT_TRUE(fs::exists(dir.path() / "run" / f)) << f;
    const auto rows = read_csv(dir.path() / "run" / "timeseries.csv");
    const std::vector<std::string> header = {"t", "r_minus", "r_plus", "ratio", "V_1", "V_2", "V_3", "iso_ratio", "H_max",
                                             "F_min", "F_max", "pinch_max", "Z_sigma_max", "Q_max", "smoczyk_min"};
    ASSERT_EQ(rows.front(), header);
    ASSERT_EQ(rows.size(), r.trajectory.snapshots.size() + 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double t = std::stod(rows[i][0]);
        const double rm = std::stod(rows[i][1]);
        EXPECT_NEAR(rm / std::cbrt(1.0 - 12.0 * t), 1.0, 1e-6) << t;
    }
    // config echo re-reads to the same config
    EXPECT_EQ(to_json(read_config(dir.path() / "run" / "config.json")), to_json(sphere_config(dir.path() / "run")));
}

TEST(CmdSimulate, ByteIdenticalOutputs) {
    TempDir dir;
    std::ostringstream log;
    ExperimentConfig c = sphere_config(dir.path() / "a");
    c.shape = "ellipsoid 1 1 1.1";
    c.perturbation = 0.02;
    c.max_steps = 60;
    cmd_simulate(c, log);
    c.output = (dir.path() / "b").string();
    cmd_simulate(c, log);
    EXPECT_EQ(read_text_file(dir.path() / "a" / "timeseries.csv"), read_text_file(dir.path() / "b" / "timeseries.csv"));
    EXPECT_EQ(read_text_file(dir.path() / "a" / "snapshots" / "snap_00006.json"),
              read_text_file(dir.path() / "b" / "snapshots" / "snap_00006.json"));
}

TEST(CmdSimulate, RejectsInadmissibleStart) {
    TempDir dir;
    std::ostringstream log;
    ExperimentConfig c = sphere_config(dir.path() / "run");
    c.shape = "ellipsoid 1 1 1.5";
    c.speed = "pow_mean,alpha=2,delta0=0.01";
    EXPECT_THROW(cmd_simulate(c, log), ConeExit);
    EXPECT_EQ(exit_code(FlowStatus::cone_exit), ExitCode::cone_exit);
    EXPECT_EQ(exit_code(FlowStatus::step_failure), ExitCode::numerical);
    EXPECT_EQ(exit_code(FlowStatus::extinction_threshold), ExitCode::ok);
}

TEST(TrajectoryIo, ReloadReproducesSnapshots) {
    TempDir dir;
    std::ostringstream log;
    ExperimentConfig c = sphere_config(dir.path() / "run");
    c.shape = "ellipsoid 1 1 1.1";
    c.max_steps = 40;
    const auto r = cmd_simulate(c, log);
    const auto loaded = load_trajectory(dir.path() / "run");
    const auto& a = r.trajectory;
    const auto& b = loaded.trajectory;
    ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
    EXPECT_EQ(a.status, b.status);
    EXPECT_EQ(a.steps, b.steps);
    EXPECT_EQ(a.T_hat, b.T_hat);
    for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
        EXPECT_EQ(a.snapshots[i].t, b.snapshots[i].t);
        EXPECT_EQ(a.snapshots[i].body.field().coefficients, b.snapshots[i].body.field().coefficients);
        EXPECT_EQ(a.snapshots[i].radii.r_minus, b.snapshots[i].radii.r_minus);
        EXPECT_EQ(a.snapshots[i].summary.pinch_max, b.snapshots[i].summary.pinch_max);
    }
}

TEST(TrajectoryIo, MissingDirectoryIsIoError) {
    TempDir dir;
    std::ostringstream log;
    EXPECT_THROW(load_trajectory(dir.path() / "absent"), IoError);
    EXPECT_THROW(load_trajectory(dir.path()), IoError);
    EXPECT_THROW(cmd_analyze(dir.path(), {0.01}, {0.01}, dir.path() / "a", log), IoError);
    write_text_file(dir.path() / "trajectory.json", "{not json");
    write_text_file(dir.path() / "config.json", "{}");
    EXPECT_THROW(load_trajectory(dir.path()), IoError);
}

TEST(CmdAnalyze, SphereTablesAreTrivial) {
    TempDir dir;
    std::ostringstream log;
    cmd_simulate(sphere_config(dir.path() / "run"), log);
    const auto r = cmd_analyze(dir.path() / "run", {0.01, 0.05}, {0.01, 0.05}, dir.path() / "analysis", log);
    for (const auto& row : r.summary.at("C2")) EXPECT_FALSE(row.at("finite").get<bool>());
    EXPECT_FALSE(r.summary.at("lambda_available").get<bool>());
    EXPECT_TRUE(r.summary.at("lambda_hat").is_null());
    EXPECT_NEAR(r.summary.at("speed_fit").at("slope").get<double>(), -2.0 / 3.0, 1e-3);
    for (const char* f : {"geometry.csv", "geombound.csv", "pinching_c1.csv", "analysis.json"})
        EXPECT_TRUE(fs::exists(dir.path() / "analysis" / f)) << f;
    EXPECT_EQ(read_csv(dir.path() / "analysis" / "geombound.csv").size(), 3u);
}

TEST(FlowVerdicts, SphereRunPasses) {
    TempDir dir;
    std::ostringstream log;
    const auto r = cmd_simulate(sphere_config(dir.path() / "run"), log);
    const auto v = flow_verdicts(r.trajectory, r.diagnostics);
    for (const auto& x : v) EXPECT_TRUE(x.passed) << x.check << ": " << x.detail;
    EXPECT_TRUE(all_passed(v));
    EXPECT_EQ(read_csv(dir.path() / "run" / "timeseries.csv").size(), r.trajectory.snapshots.size() + 1);
    EXPECT_EQ(diagnostics_csv(r.diagnostics).find("t,pinch_max,Z_sigma_max"), 0u);
}

TEST(Verify, LemmaAndSpeedVerdicts) {
    const auto lemmas = verify_lemmas(2000);
    EXPECT_EQ(lemmas.size(), 12u);
    EXPECT_TRUE(all_passed(lemmas));
    const auto speeds = verify_speed(parse_speed("pow_norm,alpha=2", 2), 2000, 1);
    EXPECT_EQ(speeds.size(), 2u);
    EXPECT_TRUE(all_passed(speeds));
    EXPECT_EQ(verdicts_json(speeds).size(), 2u);
}
