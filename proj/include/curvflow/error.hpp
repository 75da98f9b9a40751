#pragma once

#include <stdexcept>
#include <string>

namespace curvflow {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    ok = 0,
    precondition = 2,
    cone_exit = 3,
    numerical = 4,
    io = 5,
};

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, ExitCode code = ExitCode::numerical)
        : std::runtime_error(what), code_(code) {}

    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Input sizes disagree with the grid or basis they are paired with.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(what, ExitCode::precondition) {}
};

/// A field carries more modes than the grid resolves.
class ResolutionError : public Error {
public:
    explicit ResolutionError(const std::string& what) : Error(what, ExitCode::precondition) {}
};

/// Violated precondition (bad argument, unknown name, alpha <= 1, ...).
class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(what, ExitCode::precondition) {}
};

/// The radii-of-curvature matrix stopped being positive definite.
class ConvexityLost : public Error {
public:
    ConvexityLost(const std::string& what, std::size_t node, double eigenvalue)
        : Error(what, ExitCode::numerical), node_(node), eigenvalue_(eigenvalue) {}

    std::size_t node() const noexcept { return node_; }
    double eigenvalue() const noexcept { return eigenvalue_; }

private:
    std::size_t node_;
    double eigenvalue_;
};

/// The curvature left the admissible cone of the speed.
class ConeExit : public Error {
public:
    ConeExit(const std::string& what, std::size_t node, double ratio)
        : Error(what, ExitCode::cone_exit), node_(node), ratio_(ratio) {}

    std::size_t node() const noexcept { return node_; }
    double ratio() const noexcept { return ratio_; }

private:
    std::size_t node_;
    double ratio_;
};

/// Iterative solver or integrator failure.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what, ExitCode::numerical) {}
};

/// File system or parse failure of an external artifact.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what, ExitCode::io) {}
};

} // namespace curvflow
