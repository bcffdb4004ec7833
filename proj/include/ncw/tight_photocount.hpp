#pragma once

// Tight test functions and nonlinear inequalities for photocounting
// statistics: the N=2 tangent-line family, the N=3 cross-product family,
// the odd-N Hodge-star construction, structure verification, and violation
// maximization over node parameters.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "detectors.hpp"
#include "geometry.hpp"

namespace ncw::tight {

using geom::Vector;

struct degeneracy_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TestFunction {
    Vector lambda;              // unit norm, sign-fixed
    std::vector<double> nodes;  // t_1 < ... < t_m
    double tau = 0.0;           // endpoint, 0 or 1
    det::DetectorModel detector;
    int sign = +1;              // orientation applied to the raw construction
    double rhs = 0.0;           // Pi(tau) . lambda = sup of the curve
};

struct Margin {
    double value = 0.0;
    bool degenerate = false;
};

/// Sampled curve Pi(t) on a uniform t-grid, reused across evaluations.
struct CurveGrid {
    det::DetectorModel detector;
    std::vector<double> ts;
    std::vector<Vector> pts;
};

inline CurveGrid make_curve_grid(const det::DetectorModel& dm, int n_points = 2001) {
    CurveGrid g;
    g.detector = dm;
    g.ts.resize(static_cast<size_t>(n_points));
    g.pts.resize(static_cast<size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double t = static_cast<double>(i) / (n_points - 1);
        g.ts[static_cast<size_t>(i)] = t;
        g.pts[static_cast<size_t>(i)] = det::q_vector(dm, t);
    }
    return g;
}

namespace detail {

inline double curve_dot(const det::DetectorModel& dm, const Vector& lambda, double t) {
    return det::q_vector(dm, t).dot(lambda);
}

// Newton polish of a local maximum of g(t) = Pi(t).lambda, clamped to [0,1].
inline double refine_max(const det::DetectorModel& dm, const Vector& lambda, double t0) {
    double t = t0;
    for (int it = 0; it < 3; ++it) {
        const double g1 = det::q_vector_deriv(dm, t, 1).dot(lambda);
        const double g2 = det::q_vector_deriv(dm, t, 2).dot(lambda);
        if (!(g2 < 0.0)) break;
        double step = -g1 / g2;
        step = std::clamp(step, -0.05, 0.05);
        t = std::clamp(t + step, 0.0, 1.0);
    }
    return curve_dot(dm, lambda, t) >= curve_dot(dm, lambda, t0) ? t : t0;
}

}  // namespace detail

/// sup over t in [0,1] of Pi(t).lambda, by grid scan plus Newton refinement.
/// Returns {sup, argmax}.
inline std::pair<double, double> sup_over_curve(const CurveGrid& grid, const Vector& lambda) {
    double best = -std::numeric_limits<double>::infinity();
    size_t best_i = 0;
    for (size_t i = 0; i < grid.pts.size(); ++i) {
        const double v = grid.pts[i].dot(lambda);
        if (v > best) {
            best = v;
            best_i = i;
        }
    }
    const double t = detail::refine_max(grid.detector, lambda, grid.ts[best_i]);
    const double v = detail::curve_dot(grid.detector, lambda, t);
    return v > best ? std::make_pair(v, t) : std::make_pair(best, grid.ts[best_i]);
}

/// N=2 tangent test function at curve parameter t:
/// lambda = (-dPi(1)/dt, dPi(0)/dt), unit-normalized.
inline TestFunction lambda_n2(const det::DetectorModel& dm, double t) {
    if (dm.n != 2) throw std::invalid_argument("lambda_n2 requires N=2");
    const Vector d1 = det::q_vector_deriv(dm, t, 1);
    Vector lam(2);
    lam << -d1[1], d1[0];
    const double norm = lam.norm();
    if (norm < 1e-14) throw degeneracy_error("lambda_n2: vanishing tangent");
    lam /= norm;
    TestFunction tf;
    tf.lambda = lam;
    tf.nodes = {t};
    tf.tau = t;  // the touching point doubles as the supremum location
    tf.detector = dm;
    tf.sign = +1;
    tf.rhs = det::q_vector(dm, t).dot(lam);
    return tf;
}

/// Trivial non-negativity direction at the endpoints.
inline Vector lambda_down() {
    Vector v(2);
    v << 0.0, -1.0;
    return v;
}

namespace detail {

// Shared sign-fixing: pick the orientation for which the global maximum of
// Pi(t).lambda over [0,1] is attained at tau (and hence at the nodes, which
// share its value by construction).
inline TestFunction fix_sign(Vector raw, std::vector<double> nodes, double tau,
                             const det::DetectorModel& dm, const CurveGrid& grid,
                             double tol = 1e-9) {
    const double norm = raw.norm();
    if (norm < 1e-12)
        throw degeneracy_error("tight construction degenerate: constraint vectors nearly parallel");
    raw /= norm;
    const Vector pi_tau = det::q_vector(dm, tau);
    for (int sign : {+1, -1}) {
        const Vector lam = sign * raw;
        const double rhs = pi_tau.dot(lam);
        const auto [sup, t_sup] = sup_over_curve(grid, lam);
        (void)t_sup;
        if (sup - rhs <= tol) {
            TestFunction tf;
            tf.lambda = lam;
            tf.nodes = std::move(nodes);
            tf.tau = tau;
            tf.detector = dm;
            tf.sign = sign;
            tf.rhs = rhs;
            return tf;
        }
    }
    throw degeneracy_error("tight construction: neither orientation is supporting");
}

}  // namespace detail

/// N=3 test function lambda = +- DeltaPi(t1,tau) x dPi(t1)/dt, sign fixed so
/// the hyperplane supports the curve hull.
inline TestFunction lambda_n3(const det::DetectorModel& dm, double t1, double tau,
                              const CurveGrid& grid) {
    if (dm.n != 3) throw std::invalid_argument("lambda_n3 requires N=3");
    if (tau != 0.0 && tau != 1.0) throw std::invalid_argument("lambda_n3: tau must be 0 or 1");
    if (t1 == tau) throw std::invalid_argument("lambda_n3: t1 must differ from tau");
    const Vector delta = det::q_vector(dm, t1) - det::q_vector(dm, tau);
    const Vector d1 = det::q_vector_deriv(dm, t1, 1);
    const Vector raw = geom::generalized_cross({delta, d1});
    return detail::fix_sign(raw, {t1}, tau, dm, grid);
}

inline TestFunction lambda_n3(const det::DetectorModel& dm, double t1, double tau) {
    return lambda_n3(dm, t1, tau, make_curve_grid(dm, 4001));
}

/// Odd-N construction: lambda = +- star of the wedge of the 2m constraint
/// vectors {DeltaPi(t_i,tau), dPi(t_i)/dt}, N = 2m+1.
inline TestFunction lambda_odd(const det::DetectorModel& dm, const std::vector<double>& nodes,
                               double tau, const CurveGrid& grid) {
    const int m = static_cast<int>(nodes.size());
    if (dm.n != 2 * m + 1)
        throw std::invalid_argument("lambda_odd: need N = 2m+1 with m = nodes.size()");
    if (tau != 0.0 && tau != 1.0) throw std::invalid_argument("lambda_odd: tau must be 0 or 1");
    for (int i = 0; i < m; ++i) {
        if (nodes[static_cast<size_t>(i)] == tau)
            throw std::invalid_argument("lambda_odd: node coincides with tau");
        if (i > 0 && !(nodes[static_cast<size_t>(i - 1)] < nodes[static_cast<size_t>(i)]))
            throw std::invalid_argument("lambda_odd: nodes must be strictly increasing");
    }
    const Vector pi_tau = det::q_vector(dm, tau);
    std::vector<Vector> constraints;
    constraints.reserve(static_cast<size_t>(2 * m));
    for (double t : nodes) {
        constraints.push_back(det::q_vector(dm, t) - pi_tau);
        constraints.push_back(det::q_vector_deriv(dm, t, 1));
    }
    const Vector raw = geom::generalized_cross(constraints);
    return detail::fix_sign(raw, nodes, tau, dm, grid);
}

inline TestFunction lambda_odd(const det::DetectorModel& dm, const std::vector<double>& nodes,
                               double tau) {
    return lambda_odd(dm, nodes, tau, make_curve_grid(dm, 4001));
}

/// Combined nonlinear inequality for N=2.
/// Click: [2P(0)+P(1)]^2 - 4P(0); PNR: P(1) + P(0) ln P(0).
/// Positive value means violation.
inline Margin nonlinear_n2(const Eigen::VectorXd& P, const det::DetectorModel& dm) {
    if (dm.n != 2) throw std::invalid_argument("nonlinear_n2 requires N=2");
    if (P.size() < 2) throw std::invalid_argument("nonlinear_n2: need P(0), P(1)");
    const double p0 = P[0], p1 = P[1];
    if (dm.kind == det::Kind::ClickArray) {
        const double s = 2.0 * p0 + p1;
        return {s * s - 4.0 * p0, false};
    }
    if (p0 == 0.0) return {p1, true};  // limiting form: P(1) <= 0 boundary
    return {p1 + p0 * std::log(p0), false};
}

/// Pair of nonlinear margins for N=3, (tau=0, tau=1).
/// PNR tau=0 uses the discriminant form P(1)^2 - 2 P(0) P(2).
inline std::pair<Margin, Margin> nonlinear_n3(const Eigen::VectorXd& P,
                                              const det::DetectorModel& dm) {
    if (dm.n != 3) throw std::invalid_argument("nonlinear_n3 requires N=3");
    if (P.size() < 3) throw std::invalid_argument("nonlinear_n3: need P(0..2)");
    const double p0 = P[0], p1 = P[1], p2 = P[2];
    if (dm.kind == det::Kind::ClickArray) {
        Margin m0{p1 * p1 - 3.0 * p0 * p2, false};
        Margin m1{3.0 * p1 * p1 + p2 * p2 + 3.0 * p1 * (p0 + p2 - 1.0), false};
        return {m0, m1};
    }
    Margin m0{p1 * p1 - 2.0 * p0 * p2, false};
    // tau=1 margin: P(0) - 1 + P(1) (e^x - 1)/x with x = 2 P(2)/P(1);
    // removable singularities via expm1 / series.
    Margin m1;
    if (p1 == 0.0) {
        if (p2 == 0.0) {
            m1 = {p0 - 1.0, true};
        } else {
            m1 = {std::numeric_limits<double>::infinity(), true};
        }
    } else {
        const double x = 2.0 * p2 / p1;
        double f;  // (e^x - 1)/x
        if (std::abs(x) < 1e-8) {
            f = 1.0 + 0.5 * x + x * x / 6.0;
        } else if (x > 700.0) {
            return {m0, {std::numeric_limits<double>::infinity(), true}};
        } else {
            f = std::expm1(x) / x;
        }
        m1 = {p0 - 1.0 + p1 * f, p2 == 0.0};
    }
    return {m0, m1};
}

struct Statement2Report {
    int extra_critical_points = 0;  // critical points of Pi(t).lambda besides the nodes
    int second_deriv_zeros = 0;     // inflections of Pi.lambda in (0,1), natural parametrization
    bool interlaced = false;        // extra points fall between consecutive anchors
    bool global_max_at_nodes = false;
    std::vector<double> critical_points;
};

namespace detail {

// Roots of f on (0,1) by sign-change bisection over a dense grid.
inline std::vector<double> grid_roots(const std::function<double(double)>& f, int grid_n) {
    std::vector<double> roots;
    double prev_t = 1.0 / grid_n, prev_v = f(prev_t);
    for (int i = 2; i < grid_n; ++i) {
        const double t = static_cast<double>(i) / grid_n;
        const double v = f(t);
        if (v == 0.0) {
            roots.push_back(t);
        } else if (prev_v * v < 0.0) {
            double a = prev_t, b = t, fa = prev_v;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (a + b), fm = f(mid);
                if (fa * fm <= 0.0)
                    b = mid;
                else
                    a = mid, fa = fm;
            }
            roots.push_back(0.5 * (a + b));
        }
        prev_t = t;
        prev_v = v;
    }
    return roots;
}

}  // namespace detail

/// Checks the critical-point structure behind the odd-N construction:
/// m extra critical points interlaced with the nodes, 2m-1 zeros of the
/// second derivative, and the global maximum at nodes plus tau.
inline Statement2Report verify_statement2(const det::DetectorModel& dm, const TestFunction& tf,
                                          int grid_n = 20000) {
    const int m = static_cast<int>(tf.nodes.size());
    Statement2Report rep;
    const auto d1 = [&](double t) { return det::q_vector_deriv(dm, t, 1).dot(tf.lambda); };
    const auto d2 = [&](double t) { return det::q_vector_deriv(dm, t, 2).dot(tf.lambda); };

    // For the truncated PNR detector the inflection count holds in the
    // exponential parametrization s = t^N (d2/ds2 up to the positive factor
    // s'(t)^2): zeros of g'' - (N-1)/t g'. For click arrays g(t) is already
    // polynomial and t itself is the right variable.
    const auto d2s = [&](double t) {
        if (dm.kind == det::Kind::PnrTruncated) return d2(t) - (dm.n - 1) / t * d1(t);
        return d2(t);
    };

    const double node_tol = 1e-5;
    auto crit = detail::grid_roots(d1, grid_n);
    for (double c : crit) {
        bool is_node = false;
        for (double t : tf.nodes)
            if (std::abs(c - t) < node_tol) is_node = true;
        if (!is_node) rep.critical_points.push_back(c);
    }
    rep.extra_critical_points = static_cast<int>(rep.critical_points.size());
    rep.second_deriv_zeros = static_cast<int>(detail::grid_roots(d2s, grid_n).size());

    // anchors sorted with tau at its end; one extra critical point expected
    // strictly inside each consecutive pair.
    std::vector<double> anchors = tf.nodes;
    anchors.push_back(tf.tau);
    std::sort(anchors.begin(), anchors.end());
    rep.interlaced = rep.extra_critical_points == m;
    if (rep.interlaced) {
        auto extras = rep.critical_points;
        std::sort(extras.begin(), extras.end());
        for (int i = 0; i < m; ++i) {
            const double lo = anchors[static_cast<size_t>(i)];
            const double hi = anchors[static_cast<size_t>(i) + 1];
            const double c = extras[static_cast<size_t>(i)];
            if (!(c > lo && c < hi)) rep.interlaced = false;
        }
    }

    const CurveGrid grid = make_curve_grid(dm, 4001);
    const auto [sup, t_sup] = sup_over_curve(grid, tf.lambda);
    (void)t_sup;
    rep.global_max_at_nodes = (sup - tf.rhs) <= 1e-9;
    return rep;
}

struct ViolationReport {
    double margin = -std::numeric_limits<double>::infinity();
    std::vector<double> nodes;
    double tau = 0.0;
    double t_sup = 0.0;
    double std_error = 0.0;
    long n_samples = 0;
    bool converged = true;
};

namespace detail {

// Margin of the best orientation of the raw construction against the true
// curve supremum: max over sign of P.lambda - sup_t Pi(t).lambda. Valid for
// arbitrary node sets, tight when the hyperplane is supporting.
inline double oriented_margin(const Eigen::VectorXd& P, const Vector& raw, const CurveGrid& grid,
                              double* t_sup_out = nullptr, Vector* lam_out = nullptr) {
    const double norm = raw.norm();
    if (norm < 1e-12) return -std::numeric_limits<double>::infinity();
    const Vector lam = raw / norm;
    double best = -std::numeric_limits<double>::infinity();
    for (int sign : {+1, -1}) {
        const Vector l = sign * lam;
        const auto [sup, ts] = sup_over_curve(grid, l);
        const double margin = P.head(l.size()).dot(l) - sup;
        if (margin > best) {
            best = margin;
            if (t_sup_out) *t_sup_out = ts;
            if (lam_out) *lam_out = l;
        }
    }
    return best;
}

inline Vector raw_lambda(const det::DetectorModel& dm, const std::vector<double>& nodes,
                         double tau) {
    const Vector pi_tau = det::q_vector(dm, tau);
    std::vector<Vector> constraints;
    for (double t : nodes) {
        constraints.push_back(det::q_vector(dm, t) - pi_tau);
        constraints.push_back(det::q_vector_deriv(dm, t, 1));
    }
    return geom::generalized_cross(constraints);
}

// Nelder-Mead on the ordered-node objective (nodes sorted and clamped
// inside the objective).
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, double step, int max_iter,
                                       double tol, bool* converged) {
    const size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (size_t i = 0; i < n; ++i) simplex[i + 1][i] += step;
    std::vector<double> fv(n + 1);
    for (size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);

    auto order = [&]() {
        std::vector<size_t> idx(n + 1);
        for (size_t i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return fv[a] > fv[b]; });
        std::vector<std::vector<double>> s2;
        std::vector<double> f2;
        for (size_t i : idx) {
            s2.push_back(simplex[i]);
            f2.push_back(fv[i]);
        }
        simplex = std::move(s2);
        fv = std::move(f2);
    };
    order();
    *converged = false;
    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(fv.front() - fv.back()) < tol) {
            *converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
        auto blend = [&](double coef) {
            std::vector<double> x(n);
            for (size_t j = 0; j < n; ++j)
                x[j] = centroid[j] + coef * (simplex[n][j] - centroid[j]);
            return x;
        };
        auto xr = blend(-1.0);
        const double fr = f(xr);
        if (fr > fv[0]) {
            auto xe = blend(-2.0);
            const double fe = f(xe);
            if (fe > fr) {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
        } else if (fr > fv[n - 1]) {
            simplex[n] = xr;
            fv[n] = fr;
        } else {
            auto xc = blend(0.5);
            const double fc = f(xc);
            if (fc > fv[n]) {
                simplex[n] = xc;
                fv[n] = fc;
            } else {
                for (size_t i = 1; i <= n; ++i) {
                    for (size_t j = 0; j < n; ++j)
                        simplex[i][j] = 0.5 * (simplex[i][j] + simplex[0][j]);
                    fv[i] = f(simplex[i]);
                }
            }
        }
        order();
    }
    return simplex[0];
}

}  // namespace detail

/// Maximizes the tight-inequality margin over tau in {0,1} and ordered nodes.
/// Coarse combinatorial grid seeding followed by Nelder-Mead refinement;
/// deterministic for fixed inputs.
inline ViolationReport max_violation(const Eigen::VectorXd& P, const det::DetectorModel& dm,
                                     int m, int n_restarts = 3, int coarse_grid = 257) {
    if (dm.n != 2 * m + 1) throw std::invalid_argument("max_violation: need N = 2m+1");
    if (n_restarts < 1) n_restarts = 1;
    const CurveGrid coarse = make_curve_grid(dm, coarse_grid);
    const CurveGrid fine = make_curve_grid(dm, 4001);

    ViolationReport best;
    const double eps = 1e-4;
    for (double tau : {0.0, 1.0}) {
        auto objective = [&](const std::vector<double>& raw_nodes, const CurveGrid& grid) {
            std::vector<double> nodes = raw_nodes;
            for (double& t : nodes) t = std::clamp(t, eps, 1.0 - eps);
            std::sort(nodes.begin(), nodes.end());
            for (size_t i = 1; i < nodes.size(); ++i)
                if (nodes[i] - nodes[i - 1] < eps)
                    return std::make_pair(-std::numeric_limits<double>::infinity(), nodes);
            const Vector raw = detail::raw_lambda(dm, nodes, tau);
            return std::make_pair(detail::oriented_margin(P, raw, grid), nodes);
        };

        // combinatorial coarse seeding over 17 strata
        const int levels = 17;
        std::vector<std::pair<double, std::vector<double>>> seeds;
        std::vector<int> idx(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) idx[static_cast<size_t>(i)] = i;
        for (;;) {
            std::vector<double> nodes;
            for (int i : idx) nodes.push_back((i + 1.0) / (levels + 1.0));
            const auto [val, sorted_nodes] = objective(nodes, coarse);
            seeds.emplace_back(val, sorted_nodes);
            int k = m - 1;
            while (k >= 0 && idx[static_cast<size_t>(k)] == levels - (m - k)) --k;
            if (k < 0) break;
            ++idx[static_cast<size_t>(k)];
            for (int j = k + 1; j < m; ++j)
                idx[static_cast<size_t>(j)] = idx[static_cast<size_t>(j - 1)] + 1;
        }
        std::sort(seeds.begin(), seeds.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });

        const int restarts = std::min<int>(n_restarts, static_cast<int>(seeds.size()));
        for (int r = 0; r < restarts; ++r) {
            bool conv = true;
            auto obj1 = [&](const std::vector<double>& x) { return objective(x, coarse).first; };
            auto xbest = detail::nelder_mead(obj1, seeds[static_cast<size_t>(r)].second, 0.03,
                                             200, 1e-10, &conv);
            // final evaluation against the fine grid
            auto [val, nodes] = objective(xbest, fine);
            if (val > best.margin) {
                const Vector raw = detail::raw_lambda(dm, nodes, tau);
                double t_sup = 0.0;
                detail::oriented_margin(P, raw, fine, &t_sup);
                best.margin = val;
                best.nodes = nodes;
                best.tau = tau;
                best.t_sup = t_sup;
                best.converged = conv;
            }
        }
    }
    return best;
}

}  // namespace ncw::tight
