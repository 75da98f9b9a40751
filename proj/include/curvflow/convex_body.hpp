#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "curvflow/error.hpp"
#include "curvflow/spectral_sphere.hpp"
#include "curvflow/symmetric.hpp"

namespace curvflow {

/// Process-wide cache of grids, keyed by (dimension, degree).
inline std::shared_ptr<const SphereGrid> shared_grid(int dimension, int degree) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::shared_ptr<const SphereGrid>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{dimension, degree}];
    if (!slot) slot = std::make_shared<const SphereGrid>(SphereGrid::make(dimension, degree));
    return slot;
}

/// A convex body encoded by its support function s on S^n.
class SupportFunction {
public:
    SupportFunction(SpectralField field, std::shared_ptr<const SphereGrid> grid)
        : field_(std::move(field)), grid_(std::move(grid)) {
        if (!grid_) throw PreconditionError("support function needs a grid");
        if (field_.dimension != grid_->dimension())
            throw DimensionError("support function and grid dimensions differ");
        if (field_.coefficients.size() != coefficient_count(field_.dimension, field_.degree))
            throw DimensionError("coefficient count does not match the field degree");
        detail::check_resolution(field_, *grid_);
        values_ = synthesize(field_, *grid_);
    }

    /// Field on its own default grid (grid degree = field degree).
    static SupportFunction from_field(SpectralField field) {
        auto grid = shared_grid(field.dimension, field.degree);
        return SupportFunction(std::move(field), std::move(grid));
    }

    /// Projects grid samples onto the basis.
    static SupportFunction from_values(std::span<const double> values, std::shared_ptr<const SphereGrid> grid) {
        SpectralField f = analyze(values, *grid);
        return SupportFunction(std::move(f), std::move(grid));
    }

    const SpectralField& field() const noexcept { return field_; }
    const SphereGrid& grid() const noexcept { return *grid_; }
    const std::shared_ptr<const SphereGrid>& grid_ptr() const noexcept { return grid_; }
    int dimension() const noexcept { return field_.dimension; }
    int degree() const noexcept { return field_.degree; }
    std::span<const double> values() const noexcept { return values_; }

    /// Mean of s over the sphere (the mean width divided by two).
    double mean() const { return field_[0] / std::sqrt(grid_->measure()); }

    /// True when s > 0 at every node, i.e. the origin is interior up to grid resolution.
    bool contains_origin() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return v > 0.0; });
    }

private:
    SpectralField field_;
    std::shared_ptr<const SphereGrid> grid_;
    std::vector<double> values_;
};

/// Per-node Weingarten data of a convex body.
struct CurvatureField {
    int dimension = 2;
    std::vector<std::array<double, 2>> radii;  // r_i = 1 / kappa_i (descending)
    std::vector<std::array<double, 2>> kappa;  // ascending
    std::vector<double> H;
    std::vector<double> norm_A2;
    std::vector<double> traceless2;
    std::vector<double> C;
    std::vector<std::array<double, 3>> E;      // normalised E_0..E_n
    std::vector<double> det_R;
    std::vector<Eigen::Matrix2d> radii_matrix; // R = Hess s + s g in the frame (e_theta, e_phi)

    std::size_t size() const noexcept { return H.size(); }
    std::span<const double> kappa_at(std::size_t i) const {
        return {kappa[i].data(), static_cast<std::size_t>(dimension)};
    }
    std::span<const double> radii_at(std::size_t i) const {
        return {radii[i].data(), static_cast<std::size_t>(dimension)};
    }
};

struct CurvatureOptions {
    double eps_convex = 1e-8;
};

namespace detail {

/// Eigenvalues of a symmetric 2x2 matrix, largest first.
inline std::array<double, 2> symmetric_eigenvalues(const Eigen::Matrix2d& m) {
    const double a = m(0, 0), c = m(1, 1), b = 0.5 * (m(0, 1) + m(1, 0));
    const double mean = 0.5 * (a + c);
    const double d = std::hypot(0.5 * (a - c), b);
    const double big = mean + d;
    const double det = a * c - b * b;
    // small eigenvalue from the determinant avoids cancellation
    const double small = big > 0.0 ? det / big : mean - d;
    return {big, small};
}

inline void fill_scalars(CurvatureField& out, std::size_t i) {
    const auto k = out.kappa_at(i);
    const CurvatureScalars c = curvature_scalars(k);
    out.H[i] = c.H;
    out.norm_A2[i] = c.norm_A2;
    out.traceless2[i] = c.traceless2;
    out.C[i] = c.C;
    const std::vector<double> e = normalized_symmetric(k);
    out.E[i] = {1.0, 0.0, 0.0};
    for (std::size_t j = 1; j < e.size(); ++j) out.E[i][j] = e[j];
}

} // namespace detail

/// Principal curvatures and derived quantities at every grid node.
inline CurvatureField curvature(const SupportFunction& body, const CurvatureOptions& options = {}) {
    const SphereGrid& grid = body.grid();
    const std::size_t N = grid.size();
    const int n = body.dimension();
    const TangentialDerivatives td = tangential_derivatives(body.field(), grid);

    CurvatureField out;
    out.dimension = n;
    out.radii.resize(N);
    out.kappa.resize(N);
    out.H.resize(N);
    out.norm_A2.resize(N);
    out.traceless2.resize(N);
    out.C.resize(N);
    out.E.resize(N);
    out.det_R.resize(N);
    out.radii_matrix.resize(N);

    const double threshold = options.eps_convex * std::abs(body.mean());
    std::size_t worst = 0;
    double worst_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < N; ++i) {
        const double s = td.values[i];
        if (n == 1) {
            const double r = td.hessian[i](0, 0) + s;
            out.radii_matrix[i] << r, 0.0, 0.0, 0.0;
            out.radii[i] = {r, 0.0};
            out.kappa[i] = {1.0 / r, 0.0};
            out.det_R[i] = r;
            if (r < worst_value) { worst_value = r; worst = i; }
        } else {
            Eigen::Matrix2d R = td.hessian[i];
            R(0, 0) += s;
            R(1, 1) += s;
            out.radii_matrix[i] = R;
            const auto ev = detail::symmetric_eigenvalues(R);
            out.radii[i] = ev;
            out.kappa[i] = {1.0 / ev[0], 1.0 / ev[1]};
            out.det_R[i] = ev[0] * ev[1];
            if (ev[1] < worst_value) { worst_value = ev[1]; worst = i; }
        }
        detail::fill_scalars(out, i);
    }
    if (!(worst_value > threshold))
        throw ConvexityLost("radii matrix not positive definite at node " + std::to_string(worst)
                                + " (smallest radius " + std::to_string(worst_value) + ")",
                            worst, worst_value);
    return out;
}

/// Principal data at an arbitrary direction.
struct PointCurvature {
    std::array<double, 2> radii{};
    std::array<double, 2> kappa{};
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

inline PointCurvature curvature_at(const SupportFunction& body, const Eigen::Vector3d& u) {
    const PointDerivatives d = evaluate_derivatives(body.field(), u);
    PointCurvature out;
    out.position = d.value * u + d.gradient;
    if (body.dimension() == 1) {
        const double r = d.hessian(0, 0) + d.value;
        out.radii = {r, 0.0};
        out.kappa = {1.0 / r, 0.0};
        return out;
    }
    Eigen::Matrix2d R = d.hessian;
    R(0, 0) += d.value;
    R(1, 1) += d.value;
    out.radii = detail::symmetric_eigenvalues(R);
    out.kappa = {1.0 / out.radii[0], 1.0 / out.radii[1]};
    return out;
}

/// Points of the hypersurface indexed by their normals.
struct EmbeddingSample {
    std::vector<Eigen::Vector3d> position;
    std::vector<Eigen::Vector3d> normal;
};

inline EmbeddingSample embed(const SupportFunction& body) {
    const SphereGrid& grid = body.grid();
    const TangentialDerivatives td = tangential_derivatives(body.field(), grid);
    EmbeddingSample out;
    out.position.resize(grid.size());
    out.normal.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Eigen::Vector3d& u = grid.nodes()[i];
        Eigen::Vector3d x = td.values[i] * u + td.gradient[i](0) * grid.frame(i, 0);
        if (body.dimension() == 2) x += td.gradient[i](1) * grid.frame(i, 1);
        out.position[i] = x;
        out.normal[i] = u;
    }
    return out;
}

struct PinchingReport {
    double max_ratio = 0.0;
    std::size_t worst_node = 0;
    bool inside = true;
};

/// Largest ||A°||^2 / H^2 over the nodes and whether it is strictly below delta0.
inline PinchingReport pinching_status(const CurvatureField& curv, double delta0) {
    PinchingReport r;
    for (std::size_t i = 0; i < curv.size(); ++i) {
        const double H = curv.H[i];
        if (!(H > 0.0)) throw ConeExit("non-positive mean curvature at node " + std::to_string(i), i, H);
        const double q = curv.traceless2[i] / (H * H);
        if (q > r.max_ratio || i == 0) {
            r.max_ratio = q;
            r.worst_node = i;
        }
    }
    r.inside = r.max_ratio < delta0;
    return r;
}

/// Coefficients of the linear function u -> <p, u>.
inline SpectralField linear_field(const Eigen::Vector3d& p, int dimension, int degree) {
    SpectralField f = SpectralField::zero(dimension, degree);
    if (degree < 1) throw ResolutionError("a translation needs degree >= 1");
    if (dimension == 1) {
        const double k = std::sqrt(pi);
        f[fourier_index(1)] = k * p.x();
        f[fourier_index(1, true)] = k * p.y();
    } else {
        const double k = std::sqrt(4.0 * pi / 3.0);
        f[sh_index(1, 1)] = k * p.x();
        f[sh_index(1, -1)] = k * p.y();
        f[sh_index(1, 0)] = k * p.z();
    }
    return f;
}

/// Body translated by p (s -> s + <p, u>).
inline SupportFunction translate(const SupportFunction& body, const Eigen::Vector3d& p) {
    SpectralField f = body.field();
    const SpectralField l = linear_field(p, body.dimension(), body.degree());
    for (std::size_t i = 0; i < f.coefficients.size(); ++i) f[i] += l[i];
    return SupportFunction(std::move(f), body.grid_ptr());
}

/// Body scaled by lambda about the origin.
inline SupportFunction scale(const SupportFunction& body, double lambda) {
    SpectralField f = body.field();
    for (double& c : f.coefficients) c *= lambda;
    return SupportFunction(std::move(f), body.grid_ptr());
}

/// Steiner point (n+1)/|S^n| * integral of s u, read off the degree-1 coefficients.
inline Eigen::Vector3d steiner_point(const SupportFunction& body) {
    const SpectralField& f = body.field();
    if (body.degree() < 1) return Eigen::Vector3d::Zero();
    if (body.dimension() == 1) {
        const double k = std::sqrt(pi);
        return {f[fourier_index(1)] / k, f[fourier_index(1, true)] / k, 0.0};
    }
    const double k = std::sqrt(4.0 * pi / 3.0);
    return {f[sh_index(1, 1)] / k, f[sh_index(1, -1)] / k, f[sh_index(1, 0)] / k};
}

/// Moves `point` to the origin.
inline SupportFunction recenter(const SupportFunction& body, const Eigen::Vector3d& point) {
    return translate(body, -point);
}

/// Moves the Steiner point to the origin.
inline SupportFunction recenter(const SupportFunction& body) {
    SpectralField f = body.field();
    if (body.degree() >= 1) {
        if (body.dimension() == 1) {
            f[fourier_index(1)] = 0.0;
            f[fourier_index(1, true)] = 0.0;
        } else {
            for (int m = -1; m <= 1; ++m) f[sh_index(1, m)] = 0.0;
        }
    }
    return SupportFunction(std::move(f), body.grid_ptr());
}

} // namespace curvflow
