#pragma once

// Spectral calculus on the circle and the 2-sphere.
//
// Fields are expanded in orthonormal bases: the real trigonometric basis
// {1/sqrt(2 pi), cos k t / sqrt(pi), sin k t / sqrt(pi)} on S^1 and real
// spherical harmonics on S^2,
//   Y_l^0 = P_l^0,  Y_l^m = sqrt(2) P_l^m cos(m phi),  Y_l^{-m} = sqrt(2) P_l^m sin(m phi),
// where P_l^m are the 4 pi-normalised associated Legendre functions without the
// Condon-Shortley phase.  Grids: N = 2L + 2 equispaced angles on S^1, and
// (L + 1) Gauss-Legendre colatitudes x (2L + 2) longitudes on S^2.  Both
// integrate band-limited products of degree <= 2L exactly.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "curvflow/error.hpp"

namespace curvflow {

inline constexpr double pi = std::numbers::pi;

/// Position of the real harmonic Y_l^m (|m| <= l) in an S^2 coefficient vector.
constexpr std::size_t sh_index(int l, int m) {
    return static_cast<std::size_t>(l * l + l + m);
}

/// Position of cos(k t) (sine = false) or sin(k t) in an S^1 coefficient vector; k = 0 is the constant.
constexpr std::size_t fourier_index(int k, bool sine = false) {
    return k == 0 ? 0 : static_cast<std::size_t>(2 * k - (sine ? 0 : 1));
}

/// Number of basis functions of degree <= L on S^n.
constexpr std::size_t coefficient_count(int dimension, int degree) {
    return dimension == 1 ? static_cast<std::size_t>(2 * degree + 1)
                          : static_cast<std::size_t>((degree + 1) * (degree + 1));
}

namespace detail {

constexpr std::size_t tri_index(int l, int m) {
    return static_cast<std::size_t>(l * (l + 1) / 2 + m);
}

constexpr std::size_t tri_count(int degree) {
    return static_cast<std::size_t>((degree + 1) * (degree + 2) / 2);
}

/// Normalised associated Legendre functions and up to three colatitude
/// derivatives at a single colatitude. Derivatives require sin_t > 0.
inline void legendre_columns(int degree, double x, double sin_t, int order,
                             std::span<double> p, std::span<double> dp,
                             std::span<double> d2p, std::span<double> d3p) {
    const double inv4pi = 1.0 / std::sqrt(4.0 * pi);
    double pmm = inv4pi;
    for (int m = 0; m <= degree; ++m) {
        if (m > 0) pmm *= std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_t;
        p[tri_index(m, m)] = pmm;
        if (m + 1 <= degree) p[tri_index(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * pmm;
        for (int l = m + 2; l <= degree; ++l) {
            const double ll = l, mm = m;
            const double a = std::sqrt((4.0 * ll * ll - 1.0) / (ll * ll - mm * mm));
            const double b = std::sqrt(((ll - 1.0) * (ll - 1.0) - mm * mm)
                                       / (4.0 * (ll - 1.0) * (ll - 1.0) - 1.0));
            p[tri_index(l, m)] = a * (x * p[tri_index(l - 1, m)] - b * p[tri_index(l - 2, m)]);
        }
    }
    if (order < 1) return;

    const double cot = x / sin_t;
    const double inv_s2 = 1.0 / (sin_t * sin_t);
    for (int m = 0; m <= degree; ++m) {
        for (int l = m; l <= degree; ++l) {
            const double ll = l, mm = m;
            const std::size_t i = tri_index(l, m);
            const double below = l > m ? p[tri_index(l - 1, m)] : 0.0;
            const double c = std::sqrt((2.0 * ll + 1.0) * (ll * ll - mm * mm) / (2.0 * ll - 1.0));
            const double d1 = (ll * x * p[i] - (l > m ? c * below : 0.0)) / sin_t;
            dp[i] = d1;
            if (order < 2) continue;
            const double lam = ll * (ll + 1.0) - mm * mm * inv_s2;
            const double d2 = -cot * d1 - lam * p[i];
            d2p[i] = d2;
            if (order < 3) continue;
            d3p[i] = d1 * inv_s2 - cot * d2 - 2.0 * mm * mm * x * inv_s2 / sin_t * p[i] - lam * d1;
        }
    }
}

/// Gauss-Legendre nodes (descending, x_0 closest to +1) and weights on [-1, 1].
inline void gauss_legendre(int count, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(static_cast<std::size_t>(count), 0.0);
    weights.assign(static_cast<std::size_t>(count), 0.0);
    for (int i = 0; i < count; ++i) {
        double x = std::cos(pi * (i + 0.75) / (count + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= count; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            if (count == 1) p0 = 1.0;
            dp = count * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        nodes[static_cast<std::size_t>(i)] = x;
        weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

} // namespace detail

/// Quadrature grid on S^1 or S^2 with precomputed basis tables.
class SphereGrid {
public:
    static SphereGrid circle(int degree) { return SphereGrid(1, degree); }
    static SphereGrid sphere(int degree) { return SphereGrid(2, degree); }
    static SphereGrid make(int dimension, int degree) { return SphereGrid(dimension, degree); }

    int dimension() const noexcept { return dim_; }
    int degree() const noexcept { return degree_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t coefficient_count() const noexcept { return curvflow::coefficient_count(dim_, degree_); }

    /// Unit normals; for n = 1 the third component is zero.
    std::span<const Eigen::Vector3d> nodes() const noexcept { return nodes_; }
    std::span<const double> weights() const noexcept { return weights_; }
    /// Orthonormal tangent frame (e_theta, e_phi) per node; for n = 1 only the first is used.
    const Eigen::Vector3d& frame(std::size_t node, int axis) const {
        return axis == 0 ? e_theta_[node] : e_phi_[node];
    }

    /// |S^n|.
    double measure() const noexcept { return dim_ == 1 ? 2.0 * pi : 4.0 * pi; }

    /// Smallest angular node spacing along the resolved direction (uniform
    /// spacing on S^1, smallest Gauss-Legendre colatitude gap on S^2).
    double min_spacing() const noexcept { return min_spacing_; }

    int rings() const noexcept { return rings_; }
    int ring_size() const noexcept { return ring_size_; }
    double colatitude(int ring) const { return theta_[static_cast<std::size_t>(ring)]; }
    double longitude(int k) const { return phi_[static_cast<std::size_t>(k)]; }

    // Tables used by the transforms.
    double legendre(int order, int ring, std::size_t tri) const {
        return legendre_[static_cast<std::size_t>(order)][static_cast<std::size_t>(ring) * tri_count_ + tri];
    }
    double cos_m(int m, int k) const { return cos_[static_cast<std::size_t>(m * ring_size_ + k)]; }
    double sin_m(int m, int k) const { return sin_[static_cast<std::size_t>(m * ring_size_ + k)]; }
    double ring_weight(int ring) const { return ring_weight_[static_cast<std::size_t>(ring)]; }

private:
    SphereGrid(int dimension, int degree) : dim_(dimension), degree_(degree) {
        if (dimension != 1 && dimension != 2)
            throw DimensionError("sphere grid dimension must be 1 or 2, got " + std::to_string(dimension));
        if (degree < 0) throw ResolutionError("negative spectral degree");
        ring_size_ = 2 * degree + 2;
        phi_.resize(static_cast<std::size_t>(ring_size_));
        for (int k = 0; k < ring_size_; ++k) phi_[static_cast<std::size_t>(k)] = 2.0 * pi * k / ring_size_;
        cos_.resize(static_cast<std::size_t>((degree + 1) * ring_size_));
        sin_.resize(cos_.size());
        for (int m = 0; m <= degree; ++m)
            for (int k = 0; k < ring_size_; ++k) {
                // exact integer reduction keeps the tables symmetric
                const double a = 2.0 * pi * static_cast<double>((m * k) % ring_size_) / ring_size_;
                cos_[static_cast<std::size_t>(m * ring_size_ + k)] = std::cos(a);
                sin_[static_cast<std::size_t>(m * ring_size_ + k)] = std::sin(a);
            }
        if (dimension == 1) build_circle();
        else build_sphere();
    }

    void build_circle() {
        rings_ = 1;
        const double w = 2.0 * pi / ring_size_;
        for (int k = 0; k < ring_size_; ++k) {
            const double t = phi_[static_cast<std::size_t>(k)];
            nodes_.emplace_back(std::cos(t), std::sin(t), 0.0);
            e_theta_.emplace_back(-std::sin(t), std::cos(t), 0.0);
            e_phi_.emplace_back(0.0, 0.0, 0.0);
            weights_.push_back(w);
        }
        min_spacing_ = w;
    }

    void build_sphere() {
        rings_ = degree_ + 1;
        std::vector<double> x, w;
        detail::gauss_legendre(rings_, x, w);
        tri_count_ = detail::tri_count(degree_);
        for (auto& t : legendre_) t.assign(static_cast<std::size_t>(rings_) * tri_count_, 0.0);
        min_spacing_ = pi;
        for (int j = 0; j < rings_; ++j) {
            const double ct = x[static_cast<std::size_t>(j)];
            const double st = std::sqrt((1.0 - ct) * (1.0 + ct));
            const double th = std::acos(ct);
            theta_.push_back(th);
            ring_weight_.push_back(w[static_cast<std::size_t>(j)]);
            if (j > 0) min_spacing_ = std::min(min_spacing_, th - theta_[static_cast<std::size_t>(j - 1)]);
            const std::size_t off = static_cast<std::size_t>(j) * tri_count_;
            detail::legendre_columns(degree_, ct, st, 3,
                                     std::span<double>(legendre_[0]).subspan(off, tri_count_),
                                     std::span<double>(legendre_[1]).subspan(off, tri_count_),
                                     std::span<double>(legendre_[2]).subspan(off, tri_count_),
                                     std::span<double>(legendre_[3]).subspan(off, tri_count_));
            for (int k = 0; k < ring_size_; ++k) {
                const double ph = phi_[static_cast<std::size_t>(k)];
                const double cp = std::cos(ph), sp = std::sin(ph);
                nodes_.emplace_back(st * cp, st * sp, ct);
                e_theta_.emplace_back(ct * cp, ct * sp, -st);
                e_phi_.emplace_back(-sp, cp, 0.0);
                weights_.push_back(w[static_cast<std::size_t>(j)] * 2.0 * pi / ring_size_);
            }
        }
        if (rings_ == 1) min_spacing_ = pi;
    }

    int dim_;
    int degree_;
    int rings_ = 1;
    int ring_size_ = 0;
    std::size_t tri_count_ = 0;
    double min_spacing_ = 0.0;
    std::vector<Eigen::Vector3d> nodes_, e_theta_, e_phi_;
    std::vector<double> weights_, theta_, phi_, ring_weight_;
    std::array<std::vector<double>, 4> legendre_;
    std::vector<double> cos_, sin_;
};

/// Band-limited scalar field: coefficients in the orthonormal basis up to `degree`.
struct SpectralField {
    int dimension = 2;
    int degree = 0;
    std::vector<double> coefficients;

    static SpectralField zero(int dimension, int degree) {
        return {dimension, degree, std::vector<double>(curvflow::coefficient_count(dimension, degree), 0.0)};
    }

    double& operator[](std::size_t i) { return coefficients[i]; }
    double operator[](std::size_t i) const { return coefficients[i]; }
};

/// Quadrature projection of grid values onto the basis up to the grid degree.
inline SpectralField analyze(std::span<const double> values, const SphereGrid& grid) {
    if (values.size() != grid.size())
        throw DimensionError("analyze: " + std::to_string(values.size()) + " values for a grid of "
                             + std::to_string(grid.size()) + " nodes");
    const int L = grid.degree();
    SpectralField out = SpectralField::zero(grid.dimension(), L);
    const int nlon = grid.ring_size();
    if (grid.dimension() == 1) {
        const double w = 2.0 * pi / nlon;
        double c0 = 0.0;
        for (int k = 0; k < nlon; ++k) c0 += values[static_cast<std::size_t>(k)];
        out[0] = c0 * w / std::sqrt(2.0 * pi);
        for (int m = 1; m <= L; ++m) {
            double a = 0.0, b = 0.0;
            for (int k = 0; k < nlon; ++k) {
                a += values[static_cast<std::size_t>(k)] * grid.cos_m(m, k);
                b += values[static_cast<std::size_t>(k)] * grid.sin_m(m, k);
            }
            out[fourier_index(m)] = a * w / std::sqrt(pi);
            out[fourier_index(m, true)] = b * w / std::sqrt(pi);
        }
        return out;
    }

    const double dphi = 2.0 * pi / nlon;
    const double root2 = std::sqrt(2.0);
    std::vector<double> fc(static_cast<std::size_t>(L + 1)), fs(static_cast<std::size_t>(L + 1));
    for (int j = 0; j < grid.rings(); ++j) {
        const double* ring = values.data() + static_cast<std::size_t>(j * nlon);
        for (int m = 0; m <= L; ++m) {
            double a = 0.0, b = 0.0;
            for (int k = 0; k < nlon; ++k) {
                a += ring[k] * grid.cos_m(m, k);
                b += ring[k] * grid.sin_m(m, k);
            }
            fc[static_cast<std::size_t>(m)] = a * dphi * grid.ring_weight(j);
            fs[static_cast<std::size_t>(m)] = b * dphi * grid.ring_weight(j);
        }
        for (int l = 0; l <= L; ++l) {
            out[sh_index(l, 0)] += grid.legendre(0, j, detail::tri_index(l, 0)) * fc[0];
            for (int m = 1; m <= l; ++m) {
                const double p = root2 * grid.legendre(0, j, detail::tri_index(l, m));
                out[sh_index(l, m)] += p * fc[static_cast<std::size_t>(m)];
                out[sh_index(l, -m)] += p * fs[static_cast<std::size_t>(m)];
            }
        }
    }
    return out;
}

/// Coordinate partial derivatives of a field at every node.  On S^2 the
/// coordinates are (colatitude t, longitude p); on S^1 only t is used.
struct CoordinateDerivatives {
    int order = 0;
    std::vector<double> f, ft, fp, ftt, ftp, fpp, fttt, fttp, ftpp, fppp;
};

namespace detail {

inline void check_resolution(const SpectralField& field, const SphereGrid& grid) {
    if (field.dimension != grid.dimension())
        throw DimensionError("field dimension does not match grid dimension");
    if (field.degree > grid.degree())
        throw ResolutionError("field degree " + std::to_string(field.degree) + " exceeds grid degree "
                              + std::to_string(grid.degree()));
    if (field.coefficients.size() != curvflow::coefficient_count(field.dimension, field.degree))
        throw DimensionError("coefficient vector length does not match field degree");
}

} // namespace detail

inline CoordinateDerivatives coordinate_derivatives(const SpectralField& field, const SphereGrid& grid, int order) {
    detail::check_resolution(field, grid);
    const std::size_t n = grid.size();
    CoordinateDerivatives d;
    d.order = order;
    d.f.assign(n, 0.0);
    if (order >= 1) { d.ft.assign(n, 0.0); d.fp.assign(n, 0.0); }
    if (order >= 2) { d.ftt.assign(n, 0.0); d.ftp.assign(n, 0.0); d.fpp.assign(n, 0.0); }
    if (order >= 3) { d.fttt.assign(n, 0.0); d.fttp.assign(n, 0.0); d.ftpp.assign(n, 0.0); d.fppp.assign(n, 0.0); }
    const int L = field.degree;
    const int nlon = grid.ring_size();

    if (grid.dimension() == 1) {
        const double c0 = field[0] / std::sqrt(2.0 * pi);
        const double rs = 1.0 / std::sqrt(pi);
        for (int k = 0; k < nlon; ++k) {
            double v = c0, v1 = 0.0, v2 = 0.0, v3 = 0.0;
            for (int m = 1; m <= L; ++m) {
                const double a = field[fourier_index(m)] * rs, b = field[fourier_index(m, true)] * rs;
                const double c = grid.cos_m(m, k), s = grid.sin_m(m, k);
                const double mm = m;
                v += a * c + b * s;
                v1 += mm * (-a * s + b * c);
                v2 += -mm * mm * (a * c + b * s);
                v3 += mm * mm * mm * (a * s - b * c);
            }
            const auto i = static_cast<std::size_t>(k);
            d.f[i] = v;
            if (order >= 1) d.ft[i] = v1;
            if (order >= 2) d.ftt[i] = v2;
            if (order >= 3) d.fttt[i] = v3;
        }
        return d;
    }

    const double root2 = std::sqrt(2.0);
    const int tord = std::min(order, 3);
    // a[q][m], b[q][m]: cosine/sine amplitudes of d^q/dt^q on the current ring
    std::array<std::vector<double>, 4> a, b;
    for (int q = 0; q <= tord; ++q) {
        a[static_cast<std::size_t>(q)].assign(static_cast<std::size_t>(L + 1), 0.0);
        b[static_cast<std::size_t>(q)].assign(static_cast<std::size_t>(L + 1), 0.0);
    }
    for (int j = 0; j < grid.rings(); ++j) {
        for (int q = 0; q <= tord; ++q) {
            auto& aq = a[static_cast<std::size_t>(q)];
            auto& bq = b[static_cast<std::size_t>(q)];
            std::fill(aq.begin(), aq.end(), 0.0);
            std::fill(bq.begin(), bq.end(), 0.0);
            for (int l = 0; l <= L; ++l) {
                aq[0] += field[sh_index(l, 0)] * grid.legendre(q, j, detail::tri_index(l, 0));
                for (int m = 1; m <= l; ++m) {
                    const double p = root2 * grid.legendre(q, j, detail::tri_index(l, m));
                    aq[static_cast<std::size_t>(m)] += field[sh_index(l, m)] * p;
                    bq[static_cast<std::size_t>(m)] += field[sh_index(l, -m)] * p;
                }
            }
        }
        for (int k = 0; k < nlon; ++k) {
            const std::size_t i = static_cast<std::size_t>(j * nlon + k);
            // value and phi-derivatives for each t-derivative order q
            std::array<std::array<double, 4>, 4> acc{};
            for (int m = 0; m <= L; ++m) {
                const double c = grid.cos_m(m, k), s = grid.sin_m(m, k);
                const double mm = m;
                for (int q = 0; q <= tord; ++q) {
                    const double am = a[static_cast<std::size_t>(q)][static_cast<std::size_t>(m)];
                    const double bm = b[static_cast<std::size_t>(q)][static_cast<std::size_t>(m)];
                    const double even = am * c + bm * s;
                    const double odd = -am * s + bm * c;
                    auto& r = acc[static_cast<std::size_t>(q)];
                    r[0] += even;
                    if (q + 1 <= order) r[1] += mm * odd;
                    if (q + 2 <= order) r[2] += -mm * mm * even;
                    if (q + 3 <= order) r[3] += -mm * mm * mm * odd;
                }
            }
            d.f[i] = acc[0][0];
            if (order >= 1) { d.ft[i] = acc[1][0]; d.fp[i] = acc[0][1]; }
            if (order >= 2) { d.ftt[i] = acc[2][0]; d.ftp[i] = acc[1][1]; d.fpp[i] = acc[0][2]; }
            if (order >= 3) {
                d.fttt[i] = acc[3][0]; d.fttp[i] = acc[2][1];
                d.ftpp[i] = acc[1][2]; d.fppp[i] = acc[0][3];
            }
        }
    }
    return d;
}

/// Pointwise evaluation of the basis expansion on the grid.
inline std::vector<double> synthesize(const SpectralField& field, const SphereGrid& grid) {
    return coordinate_derivatives(field, grid, 0).f;
}

/// Covariant gradient and Hessian with respect to the round metric, expressed
/// in the orthonormal frame (e_theta, e_phi).  On S^1 only the (0) / (0,0)
/// entries are meaningful: s_t and s_tt.
struct TangentialDerivatives {
    std::vector<double> values;
    std::vector<Eigen::Vector2d> gradient;
    std::vector<Eigen::Matrix2d> hessian;
};

/// Totally symmetric third covariant derivative of a field in the orthonormal frame.
using Tensor3 = std::array<std::array<std::array<double, 2>, 2>, 2>;

namespace detail {

/// Converts coordinate derivatives at one S^2 node to covariant orthonormal-frame data.
inline void covariant_node(const CoordinateDerivatives& d, std::size_t i, double st, double ct,
                           Eigen::Vector2d& grad, Eigen::Matrix2d& hess, Tensor3* third) {
    const double cot = ct / st;
    grad = {d.ft[i], d.fp[i] / st};
    const double h00 = d.ftt[i];
    const double h01 = d.ftp[i] - cot * d.fp[i];
    const double h11 = d.fpp[i] + st * ct * d.ft[i];
    hess(0, 0) = h00;
    hess(0, 1) = hess(1, 0) = h01 / st;
    hess(1, 1) = h11 / (st * st);
    if (third == nullptr) return;

    // coordinate Hessian H_ab and its partials dH[c][a][b]
    const double H[2][2] = {{h00, h01}, {h01, h11}};
    double dH[2][2][2];
    dH[0][0][0] = d.fttt[i];
    dH[1][0][0] = d.fttp[i];
    dH[0][0][1] = dH[0][1][0] = d.fttp[i] - cot * d.ftp[i] + d.fp[i] / (st * st);
    dH[1][0][1] = dH[1][1][0] = d.ftpp[i] - cot * d.fpp[i];
    dH[0][1][1] = d.ftpp[i] + (ct * ct - st * st) * d.ft[i] + st * ct * d.ftt[i];
    dH[1][1][1] = d.fppp[i] + st * ct * d.ftp[i];
    // Christoffel symbols G[m][a][b] of the round metric in (t, p)
    double G[2][2][2] = {};
    G[0][1][1] = -st * ct;
    G[1][0][1] = G[1][1][0] = cot;
    const double scale[2] = {1.0, st};
    for (int c = 0; c < 2; ++c)
        for (int a0 = 0; a0 < 2; ++a0)
            for (int b0 = 0; b0 < 2; ++b0) {
                double v = dH[c][a0][b0];
                for (int m = 0; m < 2; ++m) v -= G[m][c][a0] * H[m][b0] + G[m][c][b0] * H[a0][m];
                (*third)[static_cast<std::size_t>(c)][static_cast<std::size_t>(a0)][static_cast<std::size_t>(b0)] =
                    v / (scale[c] * scale[a0] * scale[b0]);
            }
}

} // namespace detail

inline TangentialDerivatives tangential_derivatives(const SpectralField& field, const SphereGrid& grid) {
    const CoordinateDerivatives d = coordinate_derivatives(field, grid, 2);
    TangentialDerivatives out;
    out.values = d.f;
    out.gradient.resize(grid.size());
    out.hessian.resize(grid.size());
    if (grid.dimension() == 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            out.gradient[i] = {d.ft[i], 0.0};
            out.hessian[i] << d.ftt[i], 0.0, 0.0, 0.0;
        }
        return out;
    }
    const int nlon = grid.ring_size();
    for (int j = 0; j < grid.rings(); ++j) {
        const double th = grid.colatitude(j);
        const double st = std::sin(th), ct = std::cos(th);
        for (int k = 0; k < nlon; ++k) {
            const auto i = static_cast<std::size_t>(j * nlon + k);
            detail::covariant_node(d, i, st, ct, out.gradient[i], out.hessian[i], nullptr);
        }
    }
    return out;
}

/// Third covariant derivatives (nabla^3 f) in the orthonormal frame at every node.
/// On S^1 only [0][0][0] = f_ttt is populated.
inline std::vector<Tensor3> third_derivatives(const SpectralField& field, const SphereGrid& grid) {
    const CoordinateDerivatives d = coordinate_derivatives(field, grid, 3);
    std::vector<Tensor3> out(grid.size(), Tensor3{});
    if (grid.dimension() == 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) out[i][0][0][0] = d.fttt[i];
        return out;
    }
    const int nlon = grid.ring_size();
    Eigen::Vector2d g;
    Eigen::Matrix2d h;
    for (int j = 0; j < grid.rings(); ++j) {
        const double th = grid.colatitude(j);
        const double st = std::sin(th), ct = std::cos(th);
        for (int k = 0; k < nlon; ++k) {
            const auto i = static_cast<std::size_t>(j * nlon + k);
            detail::covariant_node(d, i, st, ct, g, h, &out[i]);
        }
    }
    return out;
}

/// Value of the expansion at an arbitrary unit vector.
inline double evaluate(const SpectralField& field, const Eigen::Vector3d& u) {
    const int L = field.degree;
    if (field.dimension == 1) {
        const double t = std::atan2(u.y(), u.x());
        double v = field[0] / std::sqrt(2.0 * pi);
        for (int m = 1; m <= L; ++m)
            v += (field[fourier_index(m)] * std::cos(m * t) + field[fourier_index(m, true)] * std::sin(m * t))
                 / std::sqrt(pi);
        return v;
    }
    const double ct = std::clamp(u.z(), -1.0, 1.0);
    const double st = std::hypot(u.x(), u.y());
    const double ph = std::atan2(u.y(), u.x());
    std::vector<double> p(detail::tri_count(L));
    detail::legendre_columns(L, ct, st, 0, p, {}, {}, {});
    double v = 0.0;
    const double root2 = std::sqrt(2.0);
    for (int l = 0; l <= L; ++l) {
        v += field[sh_index(l, 0)] * p[detail::tri_index(l, 0)];
        for (int m = 1; m <= l; ++m)
            v += root2 * p[detail::tri_index(l, m)]
                 * (field[sh_index(l, m)] * std::cos(m * ph) + field[sh_index(l, -m)] * std::sin(m * ph));
    }
    return v;
}

/// Field rotated rigidly: the returned g satisfies g(Q u) = f(u).
/// On S^1 only the upper-left 2x2 block of Q is used.
inline SpectralField rotate(const SpectralField& field, const Eigen::Matrix3d& rotation) {
    const SphereGrid grid = SphereGrid::make(field.dimension, field.degree);
    std::vector<double> values(grid.size());
    const Eigen::Matrix3d inv = rotation.transpose();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Eigen::Vector3d v = inv * grid.nodes()[i];
        if (field.dimension == 1) {
            v.z() = 0.0;
            v.normalize();
        }
        values[i] = evaluate(field, v);
    }
    return analyze(values, grid);
}

/// Derivatives of a field at an arbitrary point, in the orthonormal tangent frame (e1, e2).
struct PointDerivatives {
    double value = 0.0;
    Eigen::Vector3d gradient = Eigen::Vector3d::Zero(); // ambient tangent vector
    Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
    Eigen::Vector3d e1 = Eigen::Vector3d::Zero();
    Eigen::Vector3d e2 = Eigen::Vector3d::Zero();
};

/// Value, covariant gradient and Hessian at an arbitrary direction.  Near the
/// poles of the coordinate frame the field is rotated so that the query lands
/// on the equator, and the frame is carried back.
inline PointDerivatives evaluate_derivatives(const SpectralField& field, const Eigen::Vector3d& u) {
    PointDerivatives out;
    const int L = field.degree;
    if (field.dimension == 1) {
        const double t = std::atan2(u.y(), u.x());
        const double c0 = field[0] / std::sqrt(2.0 * pi);
        double v = c0, v1 = 0.0, v2 = 0.0;
        for (int m = 1; m <= L; ++m) {
            const double a = field[fourier_index(m)] / std::sqrt(pi), b = field[fourier_index(m, true)] / std::sqrt(pi);
            const double c = std::cos(m * t), s = std::sin(m * t);
            v += a * c + b * s;
            v1 += m * (-a * s + b * c);
            v2 += -double(m) * m * (a * c + b * s);
        }
        out.value = v;
        out.e1 = {-std::sin(t), std::cos(t), 0.0};
        out.gradient = v1 * out.e1;
        out.hessian << v2, 0.0, 0.0, 0.0;
        return out;
    }

    const double st = std::hypot(u.x(), u.y());
    if (st < 0.25) {
        // quarter turn about the x axis: z -> -y, y -> z
        Eigen::Matrix3d q;
        q << 1, 0, 0, 0, 0, -1, 0, 1, 0;
        const SpectralField g = rotate(field, q);
        PointDerivatives r = evaluate_derivatives(g, q * u);
        out.value = r.value;
        out.gradient = q.transpose() * r.gradient;
        out.hessian = r.hessian;
        out.e1 = q.transpose() * r.e1;
        out.e2 = q.transpose() * r.e2;
        return out;
    }
    const double ct = u.z();
    const double ph = std::atan2(u.y(), u.x());
    const std::size_t tc = detail::tri_count(L);
    std::vector<double> p(tc), dp(tc), d2p(tc), d3p(tc);
    detail::legendre_columns(L, ct, st, 2, p, dp, d2p, d3p);
    CoordinateDerivatives d;
    d.f = {0.0}; d.ft = {0.0}; d.fp = {0.0}; d.ftt = {0.0}; d.ftp = {0.0}; d.fpp = {0.0};
    const double root2 = std::sqrt(2.0);
    for (int l = 0; l <= L; ++l) {
        const std::size_t i0 = detail::tri_index(l, 0);
        const double c0 = field[sh_index(l, 0)];
        d.f[0] += c0 * p[i0];
        d.ft[0] += c0 * dp[i0];
        d.ftt[0] += c0 * d2p[i0];
        for (int m = 1; m <= l; ++m) {
            const std::size_t it = detail::tri_index(l, m);
            const double a = field[sh_index(l, m)] * root2, b = field[sh_index(l, -m)] * root2;
            const double c = std::cos(m * ph), s = std::sin(m * ph);
            const double even = a * c + b * s, odd = -a * s + b * c;
            const double mm = m;
            d.f[0] += p[it] * even;
            d.ft[0] += dp[it] * even;
            d.ftt[0] += d2p[it] * even;
            d.fp[0] += p[it] * mm * odd;
            d.ftp[0] += dp[it] * mm * odd;
            d.fpp[0] += -p[it] * mm * mm * even;
        }
    }
    Eigen::Vector2d g2;
    detail::covariant_node(d, 0, st, ct, g2, out.hessian, nullptr);
    out.value = d.f[0];
    const double cp = std::cos(ph), sp = std::sin(ph);
    out.e1 = {ct * cp, ct * sp, -st};
    out.e2 = {-sp, cp, 0.0};
    out.gradient = g2(0) * out.e1 + g2(1) * out.e2;
    return out;
}

/// Integral of grid values against the quadrature weights.
inline double integrate(std::span<const double> values, const SphereGrid& grid) {
    if (values.size() != grid.size()) throw DimensionError("integrate: size mismatch");
    double acc = 0.0;
    const auto w = grid.weights();
    for (std::size_t i = 0; i < values.size(); ++i) acc += w[i] * values[i];
    return acc;
}

/// Coefficients of a field re-expressed at a different truncation degree (zero padded or cut).
inline SpectralField truncate(const SpectralField& field, int degree) {
    SpectralField out = SpectralField::zero(field.dimension, degree);
    const std::size_t n = std::min(out.coefficients.size(), field.coefficients.size());
    std::copy_n(field.coefficients.begin(), n, out.coefficients.begin());
    return out;
}

/// Energy of the coefficients of exactly degree `l`.
inline double degree_energy(const SpectralField& field, int l) {
    if (l > field.degree) return 0.0;
    double e = 0.0;
    if (field.dimension == 1) {
        if (l == 0) return field[0] * field[0];
        e = field[fourier_index(l)] * field[fourier_index(l)]
            + field[fourier_index(l, true)] * field[fourier_index(l, true)];
        return e;
    }
    for (int m = -l; m <= l; ++m) e += field[sh_index(l, m)] * field[sh_index(l, m)];
    return e;
}

} // namespace curvflow
