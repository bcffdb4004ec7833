#pragma once

// Convex-geometry core: generalized cross products, supporting-hyperplane
// margins, and LP-based convex-hull membership with certificates.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncw::geom {

using Vector = Eigen::VectorXd;

struct dimension_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct lp_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Generalized cross product of N-1 vectors in R^N: the formal
/// cofactor-expansion determinant along the basis row. The result is
/// orthogonal to every input vector.
inline Vector generalized_cross(const std::vector<Vector>& vecs) {
    if (vecs.empty()) throw dimension_error("generalized_cross: no input vectors");
    const Eigen::Index n = vecs[0].size();
    if (n < 2) throw dimension_error("generalized_cross: ambient dimension must be >= 2");
    if (static_cast<Eigen::Index>(vecs.size()) != n - 1)
        throw dimension_error("generalized_cross: need exactly N-1 vectors of length N");
    for (const auto& v : vecs)
        if (v.size() != n) throw dimension_error("generalized_cross: inconsistent vector length");

    Eigen::MatrixXd rows(n - 1, n);
    for (Eigen::Index i = 0; i < n - 1; ++i) rows.row(i) = vecs[static_cast<size_t>(i)];

    Vector out(n);
    Eigen::MatrixXd minor(n - 1, n - 1);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Index c = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (k == j) continue;
            minor.col(c++) = rows.col(k);
        }
        const double det = (n - 1 <= 4) ? minor.determinant()
                                        : minor.partialPivLu().determinant();
        out[j] = (j % 2 == 0) ? det : -det;
    }
    return out;
}

/// Margin of the linear inequality with test function lambda against a
/// sampled curve: P.lambda - max_i curve_i.lambda. Positive margin means
/// the inequality is violated.
inline double evaluate_inequality(const Vector& p, const Vector& lambda,
                                  const std::vector<Vector>& curve_values) {
    if (curve_values.empty())
        throw dimension_error("evaluate_inequality: empty curve sample set");
    double sup = -std::numeric_limits<double>::infinity();
    for (const auto& c : curve_values) {
        if (c.size() != lambda.size())
            throw dimension_error("evaluate_inequality: dimension mismatch");
        sup = std::max(sup, c.dot(lambda));
    }
    if (p.size() != lambda.size())
        throw dimension_error("evaluate_inequality: dimension mismatch");
    return p.dot(lambda) - sup;
}

struct HullVerdict {
    bool inside = false;
    // inside: convex weights over the sample points (same indexing).
    std::vector<double> weights;
    // outside: separating vector with P.lambda - max_i samples_i.lambda = margin > 0.
    Vector separating;
    double margin = 0.0;
};

namespace detail {

// Dense phase-1 simplex for the feasibility LP
//   min sum(s+) + sum(s-) + art
//   s.t. A w + s+ - s- = q,  1'w + art = 1,  all vars >= 0.
// Columns: [w_0..w_{k-1} | s+_0..s+_{n-1} | s-_0..s-_{n-1} | art].
class FeasibilitySimplex {
public:
    FeasibilitySimplex(const std::vector<Vector>& samples, const Vector& q)
        : n_(q.size()), k_(static_cast<Eigen::Index>(samples.size())) {
        const Eigen::Index rows = n_ + 1;
        const Eigen::Index cols = k_ + 2 * n_ + 1;
        T_.setZero(rows + 1, cols + 1);  // last row = objective, last col = rhs

        for (Eigen::Index j = 0; j < k_; ++j) {
            T_.block(0, j, n_, 1) = samples[static_cast<size_t>(j)];
            T_(n_, j) = 1.0;
        }
        for (Eigen::Index i = 0; i < n_; ++i) {
            T_(i, k_ + i) = 1.0;        // s+
            T_(i, k_ + n_ + i) = -1.0;  // s-
        }
        T_(n_, k_ + 2 * n_) = 1.0;  // artificial on the convexity row

        for (Eigen::Index i = 0; i < n_; ++i) T_(i, cols) = q[i];
        T_(n_, cols) = 1.0;

        basis_.resize(static_cast<size_t>(rows));
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (T_(i, cols) < 0.0) {
                T_.row(i) = -T_.row(i);
                basis_[static_cast<size_t>(i)] = k_ + n_ + i;  // s-
            } else {
                basis_[static_cast<size_t>(i)] = k_ + i;  // s+
            }
        }
        basis_[static_cast<size_t>(n_)] = k_ + 2 * n_;

        // Objective row: reduced costs for cost vector c = 1 on slacks and art.
        // z-row starts as -sum of basic rows (so entries are c_j - y'a_j negated).
        for (Eigen::Index i = 0; i < rows; ++i) T_.row(rows) -= T_.row(i);
        for (Eigen::Index j = k_; j < cols; ++j) T_(rows, j) += 1.0;
    }

    // Runs the simplex; returns phase-1 optimum.
    double solve() {
        const Eigen::Index rows = n_ + 1;
        const Eigen::Index cols = T_.cols() - 1;
        const double eps = 1e-11;
        const long max_iter = 50L * (rows + cols);
        long iter = 0;
        for (;; ++iter) {
            if (iter > max_iter)
                throw lp_error("hull_membership: simplex iteration limit at iter " +
                               std::to_string(iter));
            const bool bland = iter > 10L * (rows + cols);
            Eigen::Index pivot_col = -1;
            double best = -eps;
            for (Eigen::Index j = 0; j < cols; ++j) {
                const double rc = T_(rows, j);
                if (rc < best) {
                    best = rc;
                    pivot_col = j;
                    if (bland) break;
                }
            }
            if (pivot_col < 0) break;

            Eigen::Index pivot_row = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < rows; ++i) {
                const double a = T_(i, pivot_col);
                if (a > eps) {
                    const double ratio = T_(i, cols) / a;
                    if (ratio < best_ratio - 1e-14 ||
                        (bland && std::abs(ratio - best_ratio) <= 1e-14 &&
                         pivot_row >= 0 &&
                         basis_[static_cast<size_t>(i)] < basis_[static_cast<size_t>(pivot_row)])) {
                        best_ratio = ratio;
                        pivot_row = i;
                    }
                }
            }
            if (pivot_row < 0)
                throw lp_error("hull_membership: unbounded phase-1 LP (numerical failure) at iter " +
                               std::to_string(iter));
            pivot(pivot_row, pivot_col);
        }
        return -T_(rows, cols);  // objective value
    }

    std::vector<double> weights() const {
        std::vector<double> w(static_cast<size_t>(k_), 0.0);
        const Eigen::Index cols = T_.cols() - 1;
        for (Eigen::Index i = 0; i <= n_; ++i) {
            const Eigen::Index b = basis_[static_cast<size_t>(i)];
            if (b < k_) w[static_cast<size_t>(b)] = std::max(0.0, T_(i, cols));
        }
        return w;
    }

    // Dual values for the equality rows, recovered from the reduced costs of
    // the slack columns: rc(s+_i) = 1 - y_i.
    Vector dual() const {
        Vector y(n_);
        for (Eigen::Index i = 0; i < n_; ++i) y[i] = 1.0 - T_(n_ + 1, k_ + i);
        return y;
    }

private:
    void pivot(Eigen::Index pr, Eigen::Index pc) {
        T_.row(pr) /= T_(pr, pc);
        for (Eigen::Index i = 0; i < T_.rows(); ++i) {
            if (i == pr) continue;
            const double f = T_(i, pc);
            if (f != 0.0) T_.row(i) -= f * T_.row(pr);
        }
        basis_[static_cast<size_t>(pr)] = pc;
    }

    Eigen::Index n_, k_;
    Eigen::MatrixXd T_;
    std::vector<Eigen::Index> basis_;
};

}  // namespace detail

/// Convex-hull membership via a phase-1 feasibility LP. Inside yields convex
/// weights reproducing the query; outside yields a separating vector with a
/// strictly positive margin.
inline HullVerdict hull_membership(const Vector& query, const std::vector<Vector>& samples,
                                   double tol = 1e-9) {
    if (samples.empty()) throw dimension_error("hull_membership: no samples");
    if (!(tol > 0.0)) throw dimension_error("hull_membership: tol must be positive");
    const Eigen::Index n = query.size();
    for (const auto& s : samples)
        if (s.size() != n) throw dimension_error("hull_membership: dimension mismatch");

    detail::FeasibilitySimplex lp(samples, query);
    const double opt = lp.solve();

    HullVerdict v;
    if (opt <= tol * static_cast<double>(n)) {
        v.inside = true;
        v.weights = lp.weights();
        v.margin = -opt;
        return v;
    }
    v.inside = false;
    Vector y = lp.dual();
    const double norm = y.norm();
    if (norm > 0.0) y /= norm;
    double sup = -std::numeric_limits<double>::infinity();
    for (const auto& s : samples) sup = std::max(sup, s.dot(y));
    v.separating = y;
    v.margin = query.dot(y) - sup;
    return v;
}

}  // namespace ncw::geom
