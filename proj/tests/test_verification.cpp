#include <gtest/gtest.h>

#include <cmath>

#include "curvflow/shapes.hpp"
#include "curvflow/verification.hpp"

using namespace curvflow;

namespace {

FlowConfig h2_config(int degree, int n = 2) {
    FlowConfig cfg;
    cfg.speed = builtin("pow_mean", n, 2.0);
    cfg.degree = degree;
    return cfg;
}

const Trajectory& sphere_run() {
    static const Trajectory traj = run(make_sphere(2, 12, 1.0), h2_config(12));
    return traj;
}

const Trajectory& ellipsoid_run() {
    static const Trajectory traj = [] {
        FlowConfig cfg = h2_config(16);
        cfg.stop_fraction = 0.3;
        return run(make_ellipsoid({1.0, 1.0, 1.1}, 16), cfg);
    }();
    return traj;
}

Trajectory curve_run(const SupportFunction& body, double max_dt, double end_time) {
    FlowConfig cfg = h2_config(body.degree(), 1);
    cfg.cadence = 1;
    cfg.max_dt = max_dt;
    cfg.end_time = end_time;
    return run(body, cfg);
}

} // namespace

TEST(LemmaMargins, WorkedValues) {
    const std::vector<double> k = {0.5, 1.5};
    // eps = 1/8 saturates the bounds [0.5, 1.5] H/n
    EXPECT_NEAR(pinch_margin(k), 0.0, 1e-15);
    // nC - (1 + n eps) H |A|^2 = 0.75 against 0.625, normalised by H^3 = 8
    EXPECT_NEAR(cest_margin(k), (0.75 - 0.625) / 8.0, 1e-15);
    EXPECT_NEAR(traceless_identity_margin(k), 0.0, 1e-15);
    EXPECT_GE(maclaurin_margin(k), 0.0);

    const std::vector<double> umbilic = {0.7, 0.7, 0.7};
    EXPECT_NEAR(pinch_margin(umbilic), 0.0, 1e-15);
    EXPECT_NEAR(cest_margin(umbilic), 0.0, 1e-15);
    EXPECT_NEAR(maclaurin_margin(umbilic), 0.0, 1e-15);

    // outside the cone the bounds fail
    const std::vector<double> wide = {0.1, 2.0};
    EXPECT_LT(pinch_margin(std::vector<double>{-0.1, 1.0}), -1e-3);
    EXPECT_GT(maclaurin_margin(wide), 0.0);
}

TEST(LemmaSuites, HundredThousandSamplesEach) {
    const auto reports = run_lemma_suites(100000);
    ASSERT_EQ(reports.size(), 12u);
    for (const auto& r : reports) {
        EXPECT_EQ(r.samples, 100000u) << r.lemma;
        EXPECT_EQ(r.violations, 0u) << r.lemma << " n=" << r.dimension << " worst " << r.worst_margin;
        EXPECT_TRUE(r.passed());
        EXPECT_GE(r.worst_margin, -1e-12);
        EXPECT_EQ(r.worst_witness.size(), static_cast<std::size_t>(r.dimension));
    }
    // pinching bounds are saturated by the boundary samples
    EXPECT_LT(reports[0].worst_margin, 1e-3);
}

TEST(LemmaSuites, SeedReproducible) {
    const auto a = lemma_cest_suite(3, 5000);
    const auto b = lemma_cest_suite(3, 5000);
    EXPECT_EQ(a.worst_margin, b.worst_margin);
    EXPECT_EQ(a.worst_witness, b.worst_witness);
    EXPECT_THROW(lemma_pinch_suite(1, 10), DimensionError);
}

TEST(GradientMonitor, SphereHasNoGradients) {
    const auto s = make_sphere(2, 8, 1.5);
    const auto g = gradient_inequality_monitor(s, curvature(s));
    EXPECT_NEAR(g.norm_margin, 0.0, 1e-20);
    EXPECT_NEAR(g.traceless_margin, 0.0, 1e-20);
    EXPECT_LT(g.grad_A_max, 1e-20);
    EXPECT_TRUE(g.passed());
}

TEST(GradientMonitor, EllipsoidMarginsStableUnderRefinement) {
    double previous = -std::numeric_limits<double>::infinity();
    for (int L : {16, 32, 64}) {
        const auto e = make_ellipsoid({1.0, 1.0, 1.2}, L);
        const auto g = gradient_inequality_monitor(e, curvature(e));
        const double worst = std::min(g.norm_margin, g.traceless_margin) / g.grad_A_max;
        EXPECT_GT(g.grad_A_max, 0.0);
        EXPECT_GE(worst, -1e-6) << L;
        if (L >= 32) {
            EXPECT_FALSE(g.inconclusive) << L;
            EXPECT_TRUE(g.passed()) << L;
            EXPECT_GE(worst, std::min(previous, 0.0) - 1e-9) << L;
        }
        previous = worst;
    }
}

TEST(GradientMonitor, PerturbedBody) {
    const auto b = build_shape("ellipsoid 1 0.9 1.2 + Y(3,1)*0.02 + Y(5,-2)*0.01", 2, 24);
    const auto g = gradient_inequality_monitor(b, curvature(b));
    EXPECT_TRUE(g.passed()) << g.norm_margin << " " << g.traceless_margin << " tol " << g.tolerance;
    EXPECT_THROW(gradient_inequality_monitor(make_sphere(1, 8, 1.0), curvature(make_sphere(1, 8, 1.0))),
                 DimensionError);
}

TEST(PinchingMonitor, SphereHasNoDecayExponent) {
    const auto& tr = sphere_run();
    const auto m = pinching_monitors(tr, 0.1, 0.1, {0.01, 0.05});
    ASSERT_EQ(m.rows.size(), tr.snapshots.size());
    for (const auto& row : m.rows) {
        EXPECT_NEAR(row.Z_sigma_max, -0.1 * row.H_max * row.H_max, 1e-9 * row.H_max * row.H_max);
        EXPECT_LT(row.pinch_max, 1e-20);
    }
    EXPECT_TRUE(m.Z_preserved);
    EXPECT_FALSE(m.lambda_available);
    EXPECT_TRUE(std::isnan(m.lambda_hat));
    for (const auto& [eps, c1] : m.C1) EXPECT_LT(c1, 0.0);
}

TEST(PinchingMonitor, EllipsoidPreservesAndImprovesPinching) {
    const auto& tr = ellipsoid_run();
    const double sigma = 1.05 * tr.snapshots.front().summary.pinch_max;
    const auto m = pinching_monitors(tr, sigma, sigma, {0.01, 0.05, 0.1});
    EXPECT_TRUE(m.Z_preserved);
    for (const auto& row : m.rows) EXPECT_LE(row.Z_sigma_max, row.Z_tolerance);
    ASSERT_TRUE(m.lambda_available);
    EXPECT_GT(m.lambda_hat, 0.0);
    ASSERT_EQ(m.C1.size(), 3u);
    EXPECT_GE(m.C1[0].second, m.C1[1].second);
    EXPECT_GE(m.C1[1].second, m.C1[2].second);
}

TEST(TsoMonitor, SphereClosedForm) {
    const auto& tr = sphere_run();
    const std::size_t last = tr.snapshots.size() - 1;
    const auto m = tso_monitor(tr, 0, last);
    ASSERT_FALSE(m.aborted) << m.witness;
    EXPECT_EQ(m.violations, 0u);
    const double r0 = tr.snapshots[last].radii.r_minus;
    EXPECT_NEAR(m.C_tilde, 1.0, 1e-9);
    for (std::size_t i = 0; i <= last; ++i) {
        const double r = tr.snapshots[i].radii.r_minus;
        EXPECT_NEAR(m.rows[i].Q_max, 4.0 / (r * r * (2.0 * r - r0)), 1e-8 * m.rows[i].Q_max) << i;
    }
    EXPECT_TRUE(std::isinf(m.rows[0].bound));
    const double branch1 = 36.0 / (r0 * r0 * r0);
    for (std::size_t i = 1; i <= last; ++i) {
        const double branch2 = std::pow(0.75, -2.0 / 3.0) / r0 * std::pow(tr.snapshots[i].t, -2.0 / 3.0);
        EXPECT_NEAR(m.rows[i].bound, std::max(branch1, branch2), 1e-6 * m.rows[i].bound) << i;
    }
    EXPECT_THROW(tso_monitor(tr, 2, 1), PreconditionError);
}

TEST(TsoMonitor, TimeBranchDominatesEarly) {
    FlowConfig cfg = h2_config(8);
    cfg.cadence = 1;
    cfg.end_time = 1e-3;
    const auto tr = run(make_sphere(2, 8, 1.0), cfg);
    const auto m = tso_monitor(tr, 0, tr.snapshots.size() - 1);
    ASSERT_TRUE(m.passed());
    const double r0 = m.r0;
    const double tau = tr.snapshots[1].t;
    EXPECT_GT(tau, 0.0);
    EXPECT_NEAR(m.rows[1].bound, std::pow(0.75, -2.0 / 3.0) / r0 * std::pow(tau, -2.0 / 3.0), 1e-6 * m.rows[1].bound);
    EXPECT_GT(m.rows[1].bound, 36.0 / (r0 * r0 * r0));
}

TEST(TsoMonitor, AbortsWhenSupportTooSmall) {
    const auto& tr = sphere_run();
    // a window ending at t = 0 puts r0 = 1 against a later sphere of radius < 1/2
    Trajectory reversed = tr;
    std::swap(reversed.snapshots.front(), reversed.snapshots.back());
    const auto m = tso_monitor(reversed, 0, reversed.snapshots.size() - 1);
    EXPECT_TRUE(m.aborted);
    EXPECT_FALSE(m.witness.empty());
    EXPECT_FALSE(m.passed());
}

TEST(SmoczykMonitor, SphereCentreAndBoundaryPoint) {
    const auto& tr = sphere_run();
    const auto centre = smoczyk_monitor(tr, 0, Eigen::Vector3d::Zero());
    EXPECT_GT(centre.min_margin, 0.0);
    EXPECT_NEAR(centre.margins.front().second, 1.0, 1e-12);

    // just inside the surface point with normal at the first grid node
    const Eigen::Vector3d p = (1.0 - 1e-6) * tr.snapshots.front().body.grid().nodes()[0];
    const auto edge = smoczyk_monitor(tr, 0, p);
    EXPECT_GE(edge.min_margin, 0.0);
    EXPECT_LT(edge.margins.front().second, 1e-5);
    EXPECT_THROW(smoczyk_monitor(tr, 0, Eigen::Vector3d(0.0, 0.0, 1.01)), PreconditionError);
}

TEST(SpeedBoundFit, SphereExponent) {
    const auto fit = speed_lowerbound_fit(sphere_run());
    ASSERT_TRUE(fit.available);
    EXPECT_NEAR(fit.slope, -2.0 / 3.0, 1e-3);
    // F = c_f r^-2 with r^3 = 12 (T - t)
    EXPECT_NEAR(fit.intercept, std::log(4.0 * std::pow(12.0, -2.0 / 3.0)), 1e-2);

    FlowConfig cfg = h2_config(8);
    cfg.max_steps = 20;
    cfg.cadence = 10;
    const auto short_run = run(make_sphere(2, 8, 1.0), cfg);
    EXPECT_FALSE(speed_lowerbound_fit(short_run).available);
}

TEST(CurveResidual, CircleMatchesClosedForm) {
    const auto tr = curve_run(make_sphere(1, 8, 1.0), 1e-5, 0.01);
    for (auto q : {EvolvedQuantity::F, EvolvedQuantity::H}) {
        const auto r = curve_evolution_residual(tr, q);
        EXPECT_FALSE(r.inconclusive);
        EXPECT_FALSE(r.rows.empty());
        EXPECT_LE(r.max_residual, 1e-8);
    }
    EXPECT_THROW(curve_evolution_residual(sphere_run(), EvolvedQuantity::F), DimensionError);
}

TEST(CurveResidual, CoarseCadenceIsInconclusive) {
    FlowConfig cfg = h2_config(8, 1);
    cfg.cadence = 200;
    const auto tr = run(make_ellipsoid({1.0, 0.8}, 8), cfg);
    EXPECT_TRUE(curve_evolution_residual(tr, EvolvedQuantity::F).inconclusive);
}

TEST(CurveResidual, SecondOrderUnderRefinement) {
    std::vector<double> residual;
    for (auto [L, dt] : std::vector<std::pair<int, double>>{{24, 4e-4}, {32, 2e-4}, {48, 1e-4}}) {
        const auto tr = curve_run(make_ellipsoid({1.0, 0.8}, L), dt, 0.02);
        const auto r = curve_evolution_residual(tr, EvolvedQuantity::F, 0.005, 0.015);
        ASSERT_FALSE(r.inconclusive);
        residual.push_back(r.max_residual);
    }
    EXPECT_GE(std::log2(residual[0] / residual[1]), 1.8);
    EXPECT_GE(std::log2(residual[1] / residual[2]), 1.8);
}

TEST(Diagnostics, EllipsoidRecordsAreFinite) {
    const auto& tr = ellipsoid_run();
    MonitorConfig mc;
    const auto d = diagnose(tr, mc);
    ASSERT_EQ(d.records.size(), tr.snapshots.size());
    for (const auto& r : d.records) {
        EXPECT_TRUE(std::isfinite(r.pinch_max));
        EXPECT_TRUE(std::isfinite(r.Z_sigma_max));
        EXPECT_TRUE(std::isfinite(r.Q_max));
        EXPECT_TRUE(std::isfinite(r.Q_bound) || r.t == 0.0);
        EXPECT_TRUE(std::isfinite(r.smoczyk_min));
        EXPECT_GE(r.smoczyk_min, -1e-8);
        EXPECT_TRUE(std::isfinite(r.gradient_margin));
        EXPECT_GT(r.F_min, 0.0);
    }
    EXPECT_TRUE(d.pinching.Z_preserved);
    EXPECT_TRUE(d.tso.passed()) << d.tso.witness;
    EXPECT_TRUE(d.gradient_passed);
    EXPECT_TRUE(d.speed_fit.available);
    EXPECT_NEAR(d.speed_fit.slope, -2.0 / 3.0, 0.1);
    EXPECT_EQ(d.geombound.rows.size(), 2u);
}
