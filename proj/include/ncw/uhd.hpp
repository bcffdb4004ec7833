#pragma once

// Unbalanced homodyne detection with two local-oscillator settings:
// boundary curve of the classical region, tight linear family, triangle
// inequalities, curvature condition, and mode-mismatch rescaling.
//
// Frame convention: the global phase is rotated so gamma_2 - gamma_1 is real
// positive; t parametrizes the connecting axis and d = |gamma_2 - gamma_1|/2.
// In that frame gamma_1 = -d and gamma_2 = +d.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ncw::uhd {

using Complex = std::complex<double>;

struct UhdConfig {
    Complex gamma1, gamma2;
    double eta = 1.0;
    double xi = 1.0;  // mode-mismatch overlap

    double d() const { return 0.5 * std::abs(gamma2 - gamma1); }

    void validate() const {
        if (!(d() > 0.0)) throw std::invalid_argument("UhdConfig: settings must differ");
        if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("UhdConfig: eta in (0,1]");
        if (!(xi > 0.0 && xi <= 1.0)) throw std::invalid_argument("UhdConfig: xi in (0,1]");
    }
};

struct UhdPoint {
    double p1 = 1.0;  // P(0|gamma_1)
    double p2 = 1.0;  // P(0|gamma_2)
};

/// Q symbol of the no-click UHD POVM element: exp(-|alpha-gamma|^2).
inline double uhd_q_symbol(Complex alpha, Complex gamma) {
    return std::exp(-std::norm(alpha - gamma));
}

/// Boundary curve of the classical region, parametrized by t in R:
/// (e^{-(t+d)^2}, e^{-(t-d)^2}). The t -> +-inf limits approach (0,0).
inline UhdPoint boundary_curve(double t, double d) {
    if (std::isinf(t)) return {0.0, 0.0};
    return {std::exp(-(t + d) * (t + d)), std::exp(-(t - d) * (t - d))};
}

namespace detail {

inline double pi1(double t, double d) { return std::exp(-(t + d) * (t + d)); }
inline double pi2(double t, double d) { return std::exp(-(t - d) * (t - d)); }
inline double dpi1(double t, double d) { return -2.0 * (t + d) * pi1(t, d); }
inline double dpi2(double t, double d) { return -2.0 * (t - d) * pi2(t, d); }
inline double ddpi1(double t, double d) {
    return (4.0 * (t + d) * (t + d) - 2.0) * pi1(t, d);
}
inline double ddpi2(double t, double d) {
    return (4.0 * (t - d) * (t - d) - 2.0) * pi2(t, d);
}

}  // namespace detail

/// Normal of the supporting line at boundary parameter t, positive
/// orientation: lambda(t) = (dPi2/dt, -dPi1/dt).
inline Eigen::Vector2d lambda_uhd(double t, double d) {
    return {detail::dpi2(t, d), -detail::dpi1(t, d)};
}

/// Right-hand side of the tight linear inequality at parameter t:
/// Pi(t).lambda(t) = 4 d exp(-2(t^2 + d^2)).
inline double lambda_uhd_rhs(double t, double d) {
    return 4.0 * d * std::exp(-2.0 * (t * t + d * d));
}

/// Margin of the tight linear inequality at parameter t; positive means
/// violation. For d > 1/sqrt(2) the family is no longer guaranteed tight
/// (convexity of the boundary fails); callers should warn.
inline double linear_tight_uhd(const UhdPoint& p, double t, double d) {
    const Eigen::Vector2d lam = lambda_uhd(t, d);
    return lam[0] * p.p1 + lam[1] * p.p2 - lambda_uhd_rhs(t, d);
}

inline bool uhd_curvature_ok(double d) { return d <= 1.0 / std::sqrt(2.0) + 1e-15; }

/// Best margin of the linear family over t, with a unit-normalized test
/// vector so the margin is a geometric distance scale. Grid plus golden
/// section refinement on [-T, T], T = d + 6.
inline double max_linear_margin_uhd(const UhdPoint& p, double d, int grid_n = 8001,
                                    double* t_star = nullptr) {
    const double tmax = d + 6.0;
    auto margin = [&](double t) {
        Eigen::Vector2d lam = lambda_uhd(t, d);
        const double n = lam.norm();
        if (n < 1e-300) return -std::numeric_limits<double>::infinity();
        return (lam[0] * p.p1 + lam[1] * p.p2 - lambda_uhd_rhs(t, d)) / n;
    };
    double best = -std::numeric_limits<double>::infinity(), best_t = 0.0;
    for (int i = 0; i < grid_n; ++i) {
        const double t = -tmax + 2.0 * tmax * i / (grid_n - 1);
        const double v = margin(t);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    // golden-section polish around the grid winner
    const double h = 2.0 * tmax / (grid_n - 1);
    double a = best_t - h, b = best_t + h;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    double f1 = margin(c1), f2 = margin(c2);
    for (int it = 0; it < 60; ++it) {
        if (f1 > f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - gr * (b - a);
            f1 = margin(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + gr * (b - a);
            f2 = margin(c2);
        }
    }
    const double polished = std::max(f1, f2);
    if (polished > best) {
        best = polished;
        best_t = 0.5 * (a + b);
    }
    if (t_star) *t_star = best_t;
    return best;
}

enum class TriangleCase { None, SumTooSmall, Side1TooLong, Side2TooLong };

struct TriangleVerdict {
    bool nonclassical = false;
    TriangleCase violated = TriangleCase::None;
    // slack of each inequality (negative = violated): (36) a+b-2d,
    // (37) a+2d-b, (38) b+2d-a with a = sqrt(-ln P1), b = sqrt(-ln P2).
    std::array<double, 3> slack{};
};

/// Triangle test on sides (sqrt(-ln P1), sqrt(-ln P2), 2d). Violation of any
/// of the three inequalities is necessary and sufficient for nonclassicality.
inline TriangleVerdict triangle_test(const UhdPoint& p, double d) {
    if (!(p.p1 > 0.0 && p.p1 <= 1.0 && p.p2 > 0.0 && p.p2 <= 1.0))
        throw std::domain_error("triangle_test: probabilities must lie in (0,1]");
    const double a = std::sqrt(-std::log(p.p1));
    const double b = std::sqrt(-std::log(p.p2));
    TriangleVerdict v;
    v.slack = {a + b - 2.0 * d, a + 2.0 * d - b, b + 2.0 * d - a};
    if (v.slack[0] < 0.0) {
        v.nonclassical = true;
        v.violated = TriangleCase::SumTooSmall;
    } else if (v.slack[1] < 0.0) {
        v.nonclassical = true;
        v.violated = TriangleCase::Side2TooLong;
    } else if (v.slack[2] < 0.0) {
        v.nonclassical = true;
        v.violated = TriangleCase::Side1TooLong;
    }
    return v;
}

/// Sign-sharing expression of the boundary curvature:
/// 16 Pi1 Pi2 d (t^2 - d^2 + 1/2).
inline double curvature_sign(double t, double d) {
    return 16.0 * detail::pi1(t, d) * detail::pi2(t, d) * d * (t * t - d * d + 0.5);
}

/// Tangential angle of the boundary curve, integrated from t = -inf where
/// theta = 0. For d <= 1/sqrt(2) it increases monotonically to 3 pi/2.
inline double tangential_angle(double t, double d, int n_steps = 40000) {
    // the integrand tails decay like e^{-4 d |t|}, so the start point has to
    // scale with 1/d to keep the truncated mass below ~1e-9
    const double t0 = -(d + 8.0 + 6.0 / d);
    if (t <= t0) return 0.0;
    auto integrand = [&](double s) {
        const double num = detail::dpi1(s, d) * detail::ddpi2(s, d) -
                           detail::dpi2(s, d) * detail::ddpi1(s, d);
        const double d1 = detail::dpi1(s, d), d2v = detail::dpi2(s, d);
        const double den = d1 * d1 + d2v * d2v;
        if (den < 1e-300) return 0.0;
        return num / den;
    };
    // composite Simpson
    int n = n_steps;
    if (n % 2 != 0) ++n;
    const double h = (t - t0) / n;
    double acc = integrand(t0) + integrand(t);
    for (int i = 1; i < n; ++i) acc += integrand(t0 + i * h) * (i % 2 == 0 ? 2.0 : 4.0);
    return acc * h / 3.0;
}

/// Mode-mismatch factor g(gamma; eta; xi) = exp(-eta |gamma|^2 (1-xi)/xi).
inline double mismatch_factor(Complex gamma, double eta, double xi) {
    if (!(xi > 0.0)) throw std::domain_error("mismatch_factor: xi must be positive");
    return std::exp(-eta * std::norm(gamma) * (1.0 - xi) / xi);
}

/// Q symbol including efficiency and mode mismatch.
inline double uhd_q_symbol_mismatch(Complex alpha, Complex gamma, double eta, double xi) {
    return std::exp(-eta * std::norm(alpha - gamma)) * mismatch_factor(gamma, eta, xi);
}

/// Rescales a two-setting test function so the mismatch factors cancel:
/// lambda' = (lambda1/g(gamma1), lambda2/g(gamma2)). The effective
/// displacements become sqrt(eta) gamma_i.
inline Eigen::Vector2d mode_mismatch_rescale(const Eigen::Vector2d& lambda,
                                             const UhdConfig& cfg) {
    cfg.validate();
    return {lambda[0] / mismatch_factor(cfg.gamma1, cfg.eta, cfg.xi),
            lambda[1] / mismatch_factor(cfg.gamma2, cfg.eta, cfg.xi)};
}

}  // namespace ncw::uhd
