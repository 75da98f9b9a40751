#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "curvflow/error.hpp"

namespace curvflow {

/// Result of a standard-form LP  min c^T y  s.t.  A y = b, y >= 0.
struct LpResult {
    Eigen::VectorXd y;
    /// Simplex multipliers pi = c_B^T B^{-1}; for an LP that is the dual of
    /// max b'^T x s.t. A^T x <= c, these are the optimal x.
    Eigen::VectorXd multipliers;
    double objective = 0.0;
    int iterations = 0;
};

namespace detail {

struct SimplexState {
    const Eigen::MatrixXd& A;
    Eigen::VectorXd cost; // over structural + artificial columns
    std::vector<int> basis;
    Eigen::MatrixXd Binv;
    Eigen::VectorXd xb;

    double column(int j, int row) const { return j < A.cols() ? A(row, j) : (j - A.cols() == row ? 1.0 : 0.0); }

    Eigen::VectorXd column(int j) const {
        if (j < A.cols()) return A.col(j);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(A.rows());
        e(j - A.cols()) = 1.0;
        return e;
    }

    void refactor() {
        const Eigen::Index k = A.rows();
        Eigen::MatrixXd B(k, k);
        for (Eigen::Index r = 0; r < k; ++r) B.col(r) = column(basis[static_cast<std::size_t>(r)]);
        Binv = B.partialPivLu().inverse();
    }
};

/// Runs primal simplex iterations on `st` over the columns with allowed[j] true.
/// Dantzig pricing with lowest-index ties; Bland's rule after a run of degenerate pivots.
inline int simplex_iterate(SimplexState& st, const std::vector<char>& allowed, const Eigen::VectorXd& b,
                           int max_iterations, double tol) {
    const Eigen::Index k = st.A.rows();
    const int total = static_cast<int>(allowed.size());
    int degenerate_run = 0;
    for (int it = 0; it < max_iterations; ++it) {
        Eigen::VectorXd cb(k);
        for (Eigen::Index r = 0; r < k; ++r) cb(r) = st.cost(st.basis[static_cast<std::size_t>(r)]);
        const Eigen::RowVectorXd pi = cb.transpose() * st.Binv;
        const bool bland = degenerate_run > 50;
        const Eigen::Index m = st.A.cols();
        Eigen::VectorXd reduced(total);
        reduced.head(m) = st.cost.head(m) - st.A.transpose() * pi.transpose();
        reduced.tail(total - m) = st.cost.tail(total - m) - pi.transpose();
        int enter = -1;
        double best = -tol;
        for (int j = 0; j < total; ++j) {
            if (!allowed[static_cast<std::size_t>(j)]) continue;
            const double d = reduced(j);
            if (d < best) {
                best = d;
                enter = j;
                if (bland) break;
            }
        }
        if (enter < 0) return it;
        const Eigen::VectorXd dir = st.Binv * st.column(enter);
        int leave = -1;
        double ratio = std::numeric_limits<double>::infinity();
        for (Eigen::Index r = 0; r < k; ++r) {
            if (dir(r) <= tol) continue;
            const double q = st.xb(r) / dir(r);
            if (q < ratio - 1e-15
                || (q <= ratio + 1e-15 && leave >= 0 && st.basis[static_cast<std::size_t>(r)] < st.basis[static_cast<std::size_t>(leave)])) {
                ratio = q;
                leave = static_cast<int>(r);
            }
        }
        if (leave < 0) throw NumericalError("linear program is unbounded");
        degenerate_run = ratio <= tol ? degenerate_run + 1 : 0;
        st.basis[static_cast<std::size_t>(leave)] = enter;
        st.refactor();
        st.xb = st.Binv * b;
        for (Eigen::Index r = 0; r < k; ++r)
            if (st.xb(r) < 0.0 && st.xb(r) > -1e-11) st.xb(r) = 0.0;
    }
    return -1;
}

} // namespace detail

/// Dense two-phase revised simplex for min c^T y, A y = b, y >= 0 with few rows.
/// Deterministic for a given input.
inline LpResult solve_standard_lp(const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in, const Eigen::VectorXd& c,
                                  int max_iterations = 20000, double tol = 1e-11) {
    const Eigen::Index k = A_in.rows(), m = A_in.cols();
    if (b_in.size() != k || c.size() != m) throw DimensionError("linear program dimensions disagree");
    Eigen::MatrixXd A = A_in;
    Eigen::VectorXd b = b_in;
    for (Eigen::Index r = 0; r < k; ++r)
        if (b(r) < 0) {
            A.row(r) *= -1.0;
            b(r) *= -1.0;
        }
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());

    detail::SimplexState st{A, Eigen::VectorXd::Zero(m + k), {}, {}, {}};
    for (Eigen::Index r = 0; r < k; ++r) {
        st.basis.push_back(static_cast<int>(m + r));
        st.cost(m + r) = 1.0;
    }
    st.refactor();
    st.xb = st.Binv * b;
    std::vector<char> allowed(static_cast<std::size_t>(m + k), 1);
    int it1 = detail::simplex_iterate(st, allowed, b, max_iterations, tol);
    auto dump = [&](const char* phase, int iters) {
        std::ostringstream s;
        s << "simplex did not converge in " << phase << " after " << iters << " iterations; basis:";
        for (int j : st.basis) s << ' ' << j;
        s << "; basic values:";
        for (Eigen::Index r = 0; r < k; ++r) s << ' ' << st.xb(r);
        return s.str();
    };
    if (it1 < 0) throw NumericalError(dump("phase 1", max_iterations));
    double infeasibility = 0.0;
    for (Eigen::Index r = 0; r < k; ++r)
        if (st.basis[static_cast<std::size_t>(r)] >= m) infeasibility += st.xb(r);
    if (infeasibility > 1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff()))
        throw NumericalError("linear program is infeasible (phase 1 residual " + std::to_string(infeasibility) + ")");

    // drive zero-level artificials out of the basis where possible
    for (Eigen::Index r = 0; r < k; ++r) {
        if (st.basis[static_cast<std::size_t>(r)] < m) continue;
        for (Eigen::Index j = 0; j < m; ++j) {
            bool in_basis = false;
            for (int bj : st.basis) in_basis |= bj == j;
            if (in_basis) continue;
            if (std::abs((st.Binv.row(r) * A.col(j))(0)) > 1e-9) {
                st.basis[static_cast<std::size_t>(r)] = static_cast<int>(j);
                st.refactor();
                st.xb = st.Binv * b;
                break;
            }
        }
    }

    st.cost.setZero();
    st.cost.head(m) = c / scale;
    for (Eigen::Index j = m; j < m + k; ++j) allowed[static_cast<std::size_t>(j)] = 0;
    const int it2 = detail::simplex_iterate(st, allowed, b, max_iterations, tol);
    if (it2 < 0) throw NumericalError(dump("phase 2", max_iterations));

    LpResult out;
    out.iterations = it1 + it2;
    out.y = Eigen::VectorXd::Zero(m);
    for (Eigen::Index r = 0; r < k; ++r) {
        const int j = st.basis[static_cast<std::size_t>(r)];
        if (j < m) out.y(j) = std::max(0.0, st.xb(r));
    }
    Eigen::VectorXd cb(k);
    for (Eigen::Index r = 0; r < k; ++r) cb(r) = st.cost(st.basis[static_cast<std::size_t>(r)]) * scale;
    out.multipliers = (cb.transpose() * st.Binv).transpose();
    // undo the row sign flips
    for (Eigen::Index r = 0; r < k; ++r)
        if (b_in(r) < 0) out.multipliers(r) *= -1.0;
    out.objective = c.dot(out.y);
    return out;
}

} // namespace curvflow
