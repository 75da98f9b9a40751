#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "curvflow/convex_body.hpp"
#include "curvflow/shapes.hpp"
#include "curvflow/snapshot_io.hpp"
#include "test_support.hpp"

using namespace curvflow;
using test_support::relative_error;

namespace {

CurvatureField single_node(double k1, double k2) {
    CurvatureField c;
    c.dimension = 2;
    c.radii = {{1.0 / k2, 1.0 / k1}};
    c.kappa = {{k1, k2}};
    c.H = {0.0};
    c.norm_A2 = {0.0};
    c.traceless2 = {0.0};
    c.C = {0.0};
    c.E = {{}};
    c.det_R = {c.radii[0][0] * c.radii[0][1]};
    c.radii_matrix = {Eigen::Matrix2d::Identity()};
    detail::fill_scalars(c, 0);
    return c;
}

} // namespace

TEST(Curvature, SphereOfRadiusTwo) {
    const auto body = make_sphere(2, 12, 2.0);
    const auto c = curvature(body);
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_NEAR(c.kappa[i][0], 0.5, 1e-13);
        EXPECT_NEAR(c.kappa[i][1], 0.5, 1e-13);
        EXPECT_NEAR(c.H[i], 1.0, 1e-13);
        EXPECT_NEAR(c.E[i][0], 1.0, 0.0);
        EXPECT_NEAR(c.E[i][1], 0.5, 1e-13);
        EXPECT_NEAR(c.E[i][2], 0.25, 1e-13);
        EXPECT_NEAR(c.traceless2[i], 0.0, 1e-14);
        EXPECT_NEAR(c.det_R[i], 4.0, 1e-12);
    }
}

TEST(Curvature, CircleAndEllipse) {
    const auto c = curvature(make_sphere(1, 16, 2.0));
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_NEAR(c.kappa[i][0], 0.5, 1e-13);
        EXPECT_NEAR(c.E[i][1], 0.5, 1e-13);
        EXPECT_EQ(c.traceless2[i], 0.0);
    }
    const auto ellipse = make_ellipsoid({2.0, 1.0}, 48);
    EXPECT_NEAR(curvature_at(ellipse, {1, 0, 0}).kappa[0], 2.0, 1e-8);
    EXPECT_NEAR(curvature_at(ellipse, {0, 1, 0}).kappa[0], 0.25, 1e-8);
}

TEST(Curvature, EllipsoidAxisPoints) {
    const std::vector<double> a = {1.0, 1.0, 1.2};
    const auto body = make_ellipsoid(a, 32);
    for (int axis = 0; axis < 3; ++axis)
        for (double sign : {1.0, -1.0}) {
            Eigen::Vector3d u = Eigen::Vector3d::Zero();
            u[axis] = sign;
            std::vector<double> expect;
            for (int j = 0; j < 3; ++j)
                if (j != axis) expect.push_back(a[static_cast<std::size_t>(axis)] / (a[static_cast<std::size_t>(j)] * a[static_cast<std::size_t>(j)]));
            std::sort(expect.begin(), expect.end());
            const auto pc = curvature_at(body, u);
            EXPECT_LT(relative_error(pc.kappa[0], expect[0]), 1e-6) << "axis " << axis;
            EXPECT_LT(relative_error(pc.kappa[1], expect[1]), 1e-6) << "axis " << axis;
        }
}

TEST(Curvature, TranslationInvariance) {
    std::mt19937_64 rng(11);
    for (int n : {1, 2}) {
        const auto body = test_support::random_body(rng, n, 16, 0.05);
        const auto moved = translate(body, {0.3, -0.2, n == 2 ? 0.7 : 0.0});
        const auto c0 = curvature(body);
        const auto c1 = curvature(moved);
        for (std::size_t i = 0; i < c0.size(); ++i)
            for (int j = 0; j < n; ++j) EXPECT_NEAR(c0.kappa[i][static_cast<std::size_t>(j)], c1.kappa[i][static_cast<std::size_t>(j)], 1e-10);
    }
    const auto shifted = translate(make_sphere(2, 8, 2.0), {0.0, 0.0, 0.0});
    EXPECT_NEAR(curvature(shifted).H[0], 1.0, 1e-13);
}

TEST(Curvature, ScalingCovariance) {
    std::mt19937_64 rng(12);
    const auto body = test_support::random_body(rng, 2, 16, 0.05);
    const double lambda = 2.5;
    const auto c0 = curvature(body);
    const auto c1 = curvature(scale(body, lambda));
    for (std::size_t i = 0; i < c0.size(); ++i) {
        for (int j = 0; j < 2; ++j)
            EXPECT_LT(relative_error(c1.kappa[i][static_cast<std::size_t>(j)] * lambda, c0.kappa[i][static_cast<std::size_t>(j)]), 1e-10);
        EXPECT_LT(relative_error(c1.E[i][1] * lambda, c0.E[i][1]), 1e-10);
        EXPECT_LT(relative_error(c1.E[i][2] * lambda * lambda, c0.E[i][2]), 1e-10);
        EXPECT_NEAR(c1.traceless2[i] * lambda * lambda, c0.traceless2[i], 1e-10 * c0.norm_A2[i]);
    }
}

TEST(Curvature, TracelessIdentitySortingAndMaclaurin) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        const auto body = test_support::random_body(rng, 2, 20, 0.08);
        const auto c = curvature(body);
        for (std::size_t i = 0; i < c.size(); ++i) {
            EXPECT_LE(c.kappa[i][0], c.kappa[i][1]);
            EXPECT_NEAR(c.traceless2[i], c.norm_A2[i] - c.H[i] * c.H[i] / 2.0, 1e-12 * c.norm_A2[i]);
            EXPECT_GE(c.E[i][1], std::sqrt(c.E[i][2]) * (1.0 - 1e-14));
            EXPECT_NEAR(c.kappa[i][0] * c.radii[i][0], 1.0, 1e-14);
        }
    }
}

TEST(Curvature, ConvexityLostCarriesWitness) {
    const auto body = add_harmonics(make_sphere(2, 12, 1.0), {{4, 0, 2.0}});
    try {
        (void)curvature(body);
        FAIL() << "expected convexity loss";
    } catch (const ConvexityLost& e) {
        EXPECT_LT(e.eigenvalue(), 0.0);
        EXPECT_LT(e.node(), body.grid().size());
        EXPECT_EQ(e.code(), ExitCode::numerical);
    }
}

TEST(Embedding, SpheresAndSupportIdentity) {
    const auto ball = make_sphere(2, 10, 1.5);
    const auto e = embed(ball);
    for (std::size_t i = 0; i < e.position.size(); ++i)
        EXPECT_LT((e.position[i] - 1.5 * e.normal[i]).norm(), 1e-13);

    const Eigen::Vector3d p(0.2, -0.4, 0.1);
    const auto moved = embed(translate(ball, p));
    for (std::size_t i = 0; i < moved.position.size(); ++i)
        EXPECT_LT((moved.position[i] - p - 1.5 * moved.normal[i]).norm(), 1e-12);

    std::mt19937_64 rng(5);
    const auto body = test_support::random_body(rng, 2, 16, 0.1);
    const auto eb = embed(body);
    for (std::size_t i = 0; i < eb.position.size(); ++i)
        EXPECT_NEAR(eb.position[i].dot(eb.normal[i]), body.values()[i], 1e-12);
}

TEST(Embedding, EllipsoidImplicitResidual) {
    const std::vector<double> a = {1.0, 0.9, 1.2};
    const auto e = embed(make_ellipsoid(a, 40));
    for (const auto& x : e.position) {
        const double r = x.x() * x.x() / (a[0] * a[0]) + x.y() * x.y() / (a[1] * a[1]) + x.z() * x.z() / (a[2] * a[2]);
        EXPECT_NEAR(r, 1.0, 1e-10);
    }
    const auto ellipse = embed(make_ellipsoid({1.3, 0.8}, 48));
    for (const auto& x : ellipse.position)
        EXPECT_NEAR(x.x() * x.x() / 1.69 + x.y() * x.y() / 0.64, 1.0, 1e-10);
}

TEST(Pinching, RatiosAndCone) {
    const auto sphere = curvature(make_sphere(2, 6, 1.0));
    const auto s = pinching_status(sphere, 0.01);
    EXPECT_NEAR(s.max_ratio, 0.0, 1e-15);
    EXPECT_TRUE(s.inside);

    const auto node = single_node(0.5, 1.5);
    const auto r = pinching_status(node, 0.45);
    EXPECT_NEAR(r.max_ratio, 0.125, 1e-15);
    EXPECT_TRUE(r.inside);
    EXPECT_FALSE(pinching_status(node, 0.1).inside);

    auto bad = single_node(0.5, 1.5);
    bad.H[0] = -1.0;
    EXPECT_THROW(pinching_status(bad, 0.45), ConeExit);
}

TEST(Recenter, RemovesDegreeOne) {
    const Eigen::Vector3d p(0.3, 0.1, -0.2);
    const auto ball = make_sphere(2, 8, 1.0);
    const auto moved = translate(ball, p);
    EXPECT_LT((steiner_point(moved) - p).norm(), 1e-14);
    const auto back = recenter(moved);
    for (double v : back.values()) EXPECT_NEAR(v, 1.0, 1e-14);
    const auto same = recenter(ball);
    EXPECT_EQ(same.field().coefficients, ball.field().coefficients);

    std::mt19937_64 rng(21);
    const auto body = translate(test_support::random_body(rng, 2, 12, 0.1), {0.1, 0.2, 0.3});
    const auto r = recenter(body);
    for (int m = -1; m <= 1; ++m) EXPECT_NEAR(r.field()[sh_index(1, m)], 0.0, 1e-12);
    EXPECT_LT(steiner_point(r).norm(), 1e-12);
    const auto c0 = curvature(body), c1 = curvature(r);
    for (std::size_t i = 0; i < c0.size(); ++i) EXPECT_NEAR(c0.H[i], c1.H[i], 1e-10);

    const auto at = recenter(moved, p);
    for (double v : at.values()) EXPECT_NEAR(v, 1.0, 1e-13);

    const auto circle = recenter(translate(make_sphere(1, 8, 1.0), {0.5, -0.5, 0.0}));
    for (double v : circle.values()) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(Snapshot, BitExactRoundTrip) {
    std::mt19937_64 rng(3);
    const auto body = test_support::random_body(rng, 2, 10, 0.1);
    const auto path = std::filesystem::temp_directory_path() / "curvflow_snapshot_roundtrip.json";
    write_snapshot(path, body.field(), 0.1 + 1e-17);
    const Snapshot s = read_snapshot(path);
    EXPECT_EQ(s.time, 0.1 + 1e-17);
    EXPECT_EQ(s.field.degree, 10);
    EXPECT_EQ(s.field.dimension, 2);
    ASSERT_EQ(s.field.coefficients.size(), body.field().coefficients.size());
    for (std::size_t i = 0; i < s.field.coefficients.size(); ++i)
        EXPECT_EQ(s.field.coefficients[i], body.field().coefficients[i]);
    std::filesystem::remove(path);

    EXPECT_THROW(read_snapshot("/nonexistent/curvflow.json"), IoError);
    EXPECT_THROW(snapshot_from_json(nlohmann::json{{"format", "other"}}), IoError);
    auto j = snapshot_to_json(body.field(), 0.0);
    j["coefficients"].erase(0);
    EXPECT_THROW(snapshot_from_json(j), IoError);
}

TEST(Shapes, ParserAndBuilders) {
    auto s = parse_shape("sphere 1.0 + Y(4,0)*0.2 + Y(2,-1)*-1e-2");
    EXPECT_EQ(s.kind, ShapeSpec::Kind::sphere);
    EXPECT_EQ(s.radius, 1.0);
    ASSERT_EQ(s.perturbations.size(), 2u);
    EXPECT_EQ(s.perturbations[1].order, -1);
    EXPECT_EQ(s.perturbations[1].amplitude, -1e-2);

    const auto e = parse_shape("ellipsoid 1 1 1.1");
    EXPECT_EQ(e.axes, (std::vector<double>{1.0, 1.0, 1.1}));
    EXPECT_THROW(parse_shape("cube 1"), PreconditionError);
    EXPECT_THROW(parse_shape("sphere"), PreconditionError);
    EXPECT_THROW(parse_shape("sphere 1 + Y(4)*0.2"), PreconditionError);
    EXPECT_THROW(build_shape("ellipsoid 1 1 1.1", 1, 8), DimensionError);
    EXPECT_THROW(build_shape("sphere 1 + Y(9,0)*0.1", 2, 8), ResolutionError);
    EXPECT_THROW(build_shape("sphere 1 + Y(2,3)*0.1", 2, 8), PreconditionError);

    const auto body = build_shape("sphere 1.0 + Y(4,0)*0.2", 2, 8);
    EXPECT_NEAR(body.field()[sh_index(4, 0)], 0.2, 0.0);
    EXPECT_NEAR(body.mean(), 1.0, 1e-14);
    const auto circle = build_shape("sphere 2 + Y(3,1)*0.01", 1, 8);
    EXPECT_NEAR(circle.field()[fourier_index(3, true)], 0.01, 0.0);
}
