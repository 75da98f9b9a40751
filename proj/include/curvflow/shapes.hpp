#pragma once

#include <cmath>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "curvflow/convex_body.hpp"
#include "curvflow/error.hpp"
#include "curvflow/snapshot_io.hpp"

namespace curvflow {

/// Round sphere of radius r centred at the origin.
inline SupportFunction make_sphere(int dimension, int degree, double radius) {
    if (!(radius > 0.0)) throw PreconditionError("sphere radius must be positive");
    SpectralField f = SpectralField::zero(dimension, degree);
    f[0] = radius * std::sqrt(dimension == 1 ? 2.0 * pi : 4.0 * pi);
    return SupportFunction::from_field(std::move(f));
}

/// Closed-form support function of an axis-aligned ellipsoid (ellipse for n = 1).
inline double ellipsoid_support(const std::vector<double>& axes, const Eigen::Vector3d& u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < axes.size(); ++i) acc += axes[i] * axes[i] * u[static_cast<Eigen::Index>(i)] * u[static_cast<Eigen::Index>(i)];
    return std::sqrt(acc);
}

/// Ellipsoid sampled on the grid and projected to degree L.
inline SupportFunction make_ellipsoid(const std::vector<double>& axes, int degree) {
    const int n = static_cast<int>(axes.size()) - 1;
    if (n != 1 && n != 2) throw DimensionError("ellipsoid needs 2 or 3 semi-axes");
    for (double a : axes)
        if (!(a > 0.0)) throw PreconditionError("ellipsoid semi-axes must be positive");
    auto grid = shared_grid(n, degree);
    std::vector<double> values(grid->size());
    for (std::size_t i = 0; i < grid->size(); ++i) values[i] = ellipsoid_support(axes, grid->nodes()[i]);
    return SupportFunction::from_values(values, grid);
}

/// One orthonormal basis term: Y(l, m) on S^2; on S^1 order 0 is cos(l t), order 1 is sin(l t).
struct HarmonicTerm {
    int degree = 0;
    int order = 0;
    double amplitude = 0.0;
};

inline std::size_t harmonic_slot(int dimension, const HarmonicTerm& t) {
    if (dimension == 1) {
        if (t.degree < 0 || (t.order != 0 && t.order != 1) || (t.degree == 0 && t.order == 1))
            throw PreconditionError("circle harmonic needs degree >= 0 and order 0 (cos) or 1 (sin)");
        return fourier_index(t.degree, t.order == 1);
    }
    if (t.degree < 0 || std::abs(t.order) > t.degree)
        throw PreconditionError("harmonic Y(" + std::to_string(t.degree) + "," + std::to_string(t.order)
                                + ") out of range");
    return sh_index(t.degree, t.order);
}

inline SupportFunction add_harmonics(const SupportFunction& body, const std::vector<HarmonicTerm>& terms) {
    SpectralField f = body.field();
    for (const HarmonicTerm& t : terms) {
        if (t.degree > f.degree)
            throw ResolutionError("perturbation degree " + std::to_string(t.degree) + " exceeds L = "
                                  + std::to_string(f.degree));
        f[harmonic_slot(f.dimension, t)] += t.amplitude;
    }
    return SupportFunction(std::move(f), body.grid_ptr());
}

/// Parsed initial-shape description.
struct ShapeSpec {
    enum class Kind { sphere, ellipsoid, snapshot } kind = Kind::sphere;
    double radius = 1.0;
    std::vector<double> axes;
    std::string path;
    std::vector<HarmonicTerm> perturbations;
};

/// Grammar: `sphere R | ellipsoid a b [c] | snapshot PATH`, followed by any number of
/// `+ Y(l,m)*amp` terms.
inline ShapeSpec parse_shape(const std::string& text) {
    ShapeSpec spec;
    static const std::regex first_term(R"(\+\s*Y\()");
    std::smatch first;
    const std::size_t plus = std::regex_search(text, first, first_term)
                                 ? static_cast<std::size_t>(first.position(0))
                                 : std::string::npos;
    std::string head = text.substr(0, plus);
    std::istringstream in(head);
    std::string kind;
    in >> kind;
    if (kind == "sphere") {
        spec.kind = ShapeSpec::Kind::sphere;
        if (!(in >> spec.radius)) throw PreconditionError("sphere needs a radius: '" + text + "'");
    } else if (kind == "ellipsoid") {
        spec.kind = ShapeSpec::Kind::ellipsoid;
        double a;
        while (in >> a) spec.axes.push_back(a);
        if (spec.axes.size() != 2 && spec.axes.size() != 3)
            throw PreconditionError("ellipsoid needs 2 or 3 semi-axes: '" + text + "'");
    } else if (kind == "snapshot") {
        spec.kind = ShapeSpec::Kind::snapshot;
        in >> spec.path;
        if (spec.path.empty()) throw PreconditionError("snapshot needs a path");
    } else {
        throw PreconditionError("unknown shape '" + kind + "'");
    }
    std::string rest;
    if (in >> rest) throw PreconditionError("unexpected token '" + rest + "' in shape spec");
    if (plus == std::string::npos) return spec;

    static const std::regex term(
        R"(\s*\+\s*Y\(\s*(\d+)\s*,\s*(-?\d+)\s*\)\s*\*\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*)");
    std::string tail = text.substr(plus);
    std::smatch m;
    while (!tail.empty()) {
        if (!std::regex_search(tail, m, term, std::regex_constants::match_continuous))
            throw PreconditionError("cannot parse perturbation '" + tail + "'");
        spec.perturbations.push_back({std::stoi(m[1]), std::stoi(m[2]), std::stod(m[3])});
        tail = m.suffix();
    }
    return spec;
}

/// Builds the body described by `spec` at resolution L.
inline SupportFunction build_shape(const ShapeSpec& spec, int dimension, int degree) {
    SupportFunction body = [&] {
        switch (spec.kind) {
        case ShapeSpec::Kind::sphere:
            return make_sphere(dimension, degree, spec.radius);
        case ShapeSpec::Kind::ellipsoid:
            if (static_cast<int>(spec.axes.size()) != dimension + 1)
                throw DimensionError("ellipsoid axis count does not match dimension " + std::to_string(dimension));
            return make_ellipsoid(spec.axes, degree);
        case ShapeSpec::Kind::snapshot:
        default: {
            const Snapshot snap = read_snapshot(spec.path);
            if (snap.field.dimension != dimension)
                throw DimensionError("snapshot dimension does not match configuration");
            return SupportFunction::from_field(truncate(snap.field, degree));
        }
        }
    }();
    if (spec.perturbations.empty()) return body;
    return add_harmonics(body, spec.perturbations);
}

inline SupportFunction build_shape(const std::string& text, int dimension, int degree) {
    return build_shape(parse_shape(text), dimension, degree);
}

} // namespace curvflow
