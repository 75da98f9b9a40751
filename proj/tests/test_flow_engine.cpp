#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "curvflow/flow_engine.hpp"
#include "curvflow/shapes.hpp"
#include "test_support.hpp"

using namespace curvflow;

namespace {

FlowConfig h2_config(int degree, int n = 2) {
    FlowConfig cfg;
    cfg.speed = builtin("pow_mean", n, 2.0);
    cfg.degree = degree;
    return cfg;
}

double sphere_radius(double r0, double c_f, double alpha, double t) {
    return std::pow(std::pow(r0, 1.0 + alpha) - (1.0 + alpha) * c_f * t, 1.0 / (1.0 + alpha));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace

TEST(FlowConfig, Validation) {
    FlowConfig cfg = h2_config(8);
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.evaluation_degree(), 16);
    cfg.dealias = false;
    EXPECT_EQ(cfg.evaluation_degree(), 8);
    cfg.c_safe = 1.0;
    EXPECT_THROW(cfg.validate(), PreconditionError);
    cfg.c_safe = 0.2;
    cfg.stop_fraction = 0.0;
    EXPECT_THROW(cfg.validate(), PreconditionError);
    EXPECT_THROW(run(make_sphere(1, 8, 1.0), h2_config(8)), DimensionError);
}

TEST(FlowEngine, SphereMatchesClosedFormAtFixedTime) {
    FlowConfig cfg = h2_config(16);
    cfg.end_time = 0.07;
    const auto traj = run(make_sphere(2, 16, 1.0), cfg);
    ASSERT_EQ(traj.status, FlowStatus::end_time);
    const auto& last = traj.snapshots.back();
    EXPECT_NEAR(last.t, 0.07, 1e-12);
    const double exact = std::cbrt(1.0 - 12.0 * 0.07);
    for (double v : last.body.values()) EXPECT_NEAR(v / exact, 1.0, 1e-6);
    EXPECT_NEAR(last.radii.r_minus / exact, 1.0, 1e-6);
    for (const auto& s : traj.snapshots)
        EXPECT_NEAR(s.radii.r_minus / std::cbrt(1.0 - 12.0 * s.t), 1.0, 1e-6) << s.t;
}

TEST(FlowEngine, UnitSphereLifetime) {
    const auto traj = run(make_sphere(2, 16, 1.0), h2_config(16));
    ASSERT_EQ(traj.status, FlowStatus::extinction_threshold);
    EXPECT_DOUBLE_EQ(traj.c_f, 4.0);
    EXPECT_NEAR(traj.T_hat, 1.0 / 12.0, 1e-4);
    EXPECT_LT(traj.snapshots.back().radii.r_minus, 0.2);
    EXPECT_LT(traj.p_hat.norm(), 1e-10);

    for (std::size_t i = 0; i < traj.snapshots.size(); ++i)
        EXPECT_LE(rescale(traj, i).deviation, 1e-6) << i;
    const auto first = rescale(traj, 0);
    EXPECT_NEAR(first.deviation, std::abs(1.0 / traj.R(0.0) - 1.0), 1e-14);

    const auto lp = limit_point_error(traj);
    EXPECT_EQ(lp.drift.size(), traj.snapshots.size());
    EXPECT_LT(lp.late_max, 1e-8);

    Trajectory past = traj;
    past.T_hat = 0.0;
    EXPECT_THROW(rescale(past, 0), PreconditionError);
    EXPECT_THROW(rescale(traj, traj.snapshots.size()), PreconditionError);
}

TEST(FlowEngine, CircleLifetimeUnderCurvatureSquared) {
    FlowConfig cfg = h2_config(8, 1);
    const auto traj = run(make_sphere(1, 8, 1.0), cfg);
    ASSERT_EQ(traj.status, FlowStatus::extinction_threshold);
    EXPECT_DOUBLE_EQ(traj.c_f, 1.0);
    EXPECT_NEAR(traj.T_hat, 1.0 / 3.0, 1e-4);
    for (const auto& s : traj.snapshots)
        EXPECT_NEAR(s.radii.r_minus / sphere_radius(1.0, 1.0, 2.0, s.t), 1.0, 1e-6);
}

TEST(FlowEngine, TranslationEquivariance) {
    const Eigen::Vector3d p(0.1, -0.2, 0.05);
    FlowConfig cfg = h2_config(12);
    cfg.end_time = 0.05;
    const auto base = run(make_sphere(2, 12, 1.0), cfg);
    const auto moved = run(translate(make_sphere(2, 12, 1.0), p), cfg);
    ASSERT_EQ(base.snapshots.size(), moved.snapshots.size());
    for (std::size_t i = 0; i < base.snapshots.size(); ++i) {
        const auto& a = base.snapshots[i];
        const auto& b = moved.snapshots[i];
        EXPECT_NEAR(a.t, b.t, 1e-14);
        EXPECT_NEAR(a.radii.r_minus, b.radii.r_minus, 1e-10);
        EXPECT_NEAR(a.radii.r_plus, b.radii.r_plus, 1e-10);
        EXPECT_LT((b.radii.incenter - a.radii.incenter - p).norm(), 1e-9);
        EXPECT_NEAR(a.radii.r_minus / sphere_radius(1.0, 4.0, 2.0, a.t), 1.0, 1e-6);
    }
    const auto lp = limit_point_error(moved);
    EXPECT_LT(lp.late_max, 1e-8);
}

TEST(FlowEngine, ZeroStepsIsIdentity) {
    std::mt19937_64 rng(5);
    const auto body = test_support::random_body(rng, 2, 12, 0.05);
    FlowConfig cfg = h2_config(12);
    cfg.max_steps = 0;
    const auto traj = run(body, cfg);
    EXPECT_EQ(traj.status, FlowStatus::step_budget);
    ASSERT_EQ(traj.snapshots.size(), 1u);
    EXPECT_EQ(traj.steps, 0u);
    EXPECT_EQ(traj.snapshots[0].t, 0.0);
    EXPECT_LT(max_abs_diff(traj.snapshots[0].body.field().coefficients, body.field().coefficients), 1e-15);
}

TEST(FlowEngine, StepAdvancesByStableDt) {
    const FlowConfig cfg = h2_config(12);
    const auto body = prepare_state(make_sphere(2, 12, 1.0), cfg);
    const auto rhs = flow_rhs(body, cfg.speed, cfg.degree);
    const double dt = stable_dt(cfg, rhs, 2);
    EXPECT_GT(dt, 0.0);
    const auto r = step(body, 0.25, cfg);
    EXPECT_DOUBLE_EQ(r.t, 0.25 + dt);
    EXPECT_EQ(r.halvings, 0);
    EXPECT_NEAR(r.state.mean(), sphere_radius(1.0, 4.0, 2.0, dt), 1e-9);
    const auto capped = step(body, 0.0, cfg, rhs, dt / 3.0);
    EXPECT_DOUBLE_EQ(capped.dt, dt / 3.0);
}

TEST(FlowEngine, OutsideConeStopsImmediately) {
    FlowConfig cfg = h2_config(12);
    cfg.speed = builtin("pow_mean", 2, 2.0, 0, 0.01);
    const auto traj = run(make_ellipsoid({1.0, 1.0, 1.5}, 12), cfg);
    EXPECT_EQ(traj.status, FlowStatus::cone_exit);
    EXPECT_EQ(traj.steps, 0u);
    EXPECT_EQ(traj.snapshots.size(), 1u);
    EXPECT_FALSE(traj.ok());
    EXPECT_FALSE(traj.message.empty());
}

TEST(FlowEngine, DeterministicRuns) {
    std::mt19937_64 rng(9);
    const auto body = test_support::random_body(rng, 2, 10, 0.05);
    FlowConfig cfg = h2_config(10);
    cfg.max_steps = 40;
    const auto a = run(body, cfg);
    const auto b = run(body, cfg);
    ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
    for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
        EXPECT_EQ(a.snapshots[i].t, b.snapshots[i].t);
        EXPECT_EQ(a.snapshots[i].body.field().coefficients, b.snapshots[i].body.field().coefficients);
    }
}

class EllipsoidRun : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        FlowConfig cfg = h2_config(16);
        cfg.stop_fraction = 0.3;
        traj_ = new Trajectory(run(make_ellipsoid({1.0, 1.0, 1.1}, 16), cfg));
    }
    static void TearDownTestSuite() {
        delete traj_;
        traj_ = nullptr;
    }
    static Trajectory* traj_;
};

Trajectory* EllipsoidRun::traj_ = nullptr;

TEST_F(EllipsoidRun, StopsAtThresholdWithLifetimeSandwich) {
    const Trajectory& tr = *traj_;
    ASSERT_EQ(tr.status, FlowStatus::extinction_threshold) << tr.message;
    EXPECT_GT(tr.T_hat, 1.0 / 12.0);
    EXPECT_LT(tr.T_hat, std::pow(1.1, 3.0) / 12.0);
    const double k = 3.0 * tr.c_f;
    for (const auto& s : tr.snapshots) {
        const double left = tr.T_hat - s.t;
        EXPECT_GE(left, std::pow(s.radii.r_minus, 3.0) / k * (1.0 - 0.02)) << s.t;
        EXPECT_LE(left, std::pow(s.radii.r_plus, 3.0) / k * (1.0 + 0.02)) << s.t;
    }
}

TEST_F(EllipsoidRun, MonotoneContainmentAndOrderedTimes) {
    const auto& s = traj_->snapshots;
    ASSERT_GT(s.size(), 10u);
    for (std::size_t i = 1; i < s.size(); ++i) {
        EXPECT_GT(s[i].t, s[i - 1].t);
        EXPECT_LT(s[i].radii.r_plus, s[i - 1].radii.r_plus);
        EXPECT_LT(s[i].volumes.V[3], s[i - 1].volumes.V[3]);
        EXPECT_GT(s[i].summary.H_min, 0.0);
    }
    EXPECT_LT(s.back().radii.ratio, s.front().radii.ratio);
}

TEST_F(EllipsoidRun, VolumeDecayIdentity) {
    const auto report = volume_decay_check(*traj_);
    EXPECT_EQ(report.rows.size(), traj_->snapshots.size() - 2);
    EXPECT_LT(report.max_relative_error, 0.01);
    for (const auto& row : report.rows) EXPECT_LT(row.quadrature, 0.0);
}

TEST_F(EllipsoidRun, LimitPointWithinRadiusRatioBound) {
    const auto lp = limit_point_error(*traj_);
    // the incenter bound with rho the radius-ratio excess at each snapshot
    for (std::size_t i = 0; i < lp.drift.size(); ++i) {
        if (!std::isfinite(lp.drift[i])) continue;
        const double rho = traj_->snapshots[i].radii.ratio - 1.0;
        const double bound = std::cbrt(std::pow(1.0 + rho, 3.0) - 1.0);
        EXPECT_LE(lp.drift[i], bound + 1e-6) << i;
    }
    EXPECT_LT(rescale(*traj_, traj_->snapshots.size() - 1).deviation, 0.05);
}

TEST(FlowEngine, FinalTimeFitOnSyntheticSphereLaw) {
    Trajectory tr;
    tr.alpha = 2.0;
    tr.c_f = 4.0;
    for (int i = 0; i < 20; ++i) {
        FlowSnapshot s{0.004 * i, 0, make_sphere(2, 4, 1.0), {}, {}, {}};
        s.radii.r_minus = sphere_radius(1.0, 4.0, 2.0, s.t);
        tr.snapshots.push_back(s);
    }
    EXPECT_NEAR(fit_final_time(tr), 1.0 / 12.0, 1e-14);
}
