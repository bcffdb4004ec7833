#pragma once

// Q symbols of photocounting POVMs, their t-parametrization and derivatives,
// and Fock-basis diagonal POVM elements.
//
// Two detector families are supported: PNR detectors truncated at outcome N
// (outcome N pools "N or more photons") and arrays of N on-off detectors
// behind a balanced splitter. The curve parameter is t = exp(-|alpha|^2/N),
// so t=1 is vacuum and t=0 is saturation.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ncw::det {

using Vector = Eigen::VectorXd;

enum class Kind { PnrTruncated, ClickArray };

struct DetectorModel {
    Kind kind = Kind::ClickArray;
    int n = 2;  // truncation / number of on-off detectors; outcomes 0..n

    DetectorModel() = default;
    DetectorModel(Kind k, int n_) : kind(k), n(n_) {
        if (n < 1) throw std::invalid_argument("DetectorModel: N must be >= 1");
    }
};

inline DetectorModel pnr(int n) { return {Kind::PnrTruncated, n}; }
inline DetectorModel click(int n) { return {Kind::ClickArray, n}; }

namespace detail {

inline double binom(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r *= static_cast<double>(n - k + i) / i;
    return r;
}

// x^k with the convention 0^0 = 1; k < 0 never contributes (caller guards
// with a zero coefficient).
inline double ipow(double x, int k) {
    if (k <= 0) return 1.0;
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

inline void check_t(double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::domain_error("detector curve parameter t must lie in [0,1]");
}

// Poisson(u) pmf value u^n e^{-u} / n! and its first two u-derivatives.
inline double poisson_term(int n, double u) {
    double r = std::exp(-u);
    for (int i = 1; i <= n; ++i) r *= u / i;
    return r;
}

inline double poisson_term_du(int n, double u) {
    // d/du [u^n e^{-u}/n!] = (n u^{n-1} - u^n) e^{-u}/n!
    const double e = std::exp(-u);
    double fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;
    const double a = (n >= 1) ? n * ipow(u, n - 1) : 0.0;
    return e * (a - ipow(u, n)) / fact;
}

inline double poisson_term_duu(int n, double u) {
    const double e = std::exp(-u);
    double fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;
    const double a = (n >= 2) ? static_cast<double>(n) * (n - 1) * ipow(u, n - 2) : 0.0;
    const double b = (n >= 1) ? 2.0 * n * ipow(u, n - 1) : 0.0;
    return e * (a - b + ipow(u, n)) / fact;
}

}  // namespace detail

/// Q symbol Pi(n|t) of the POVM element for outcome n, 0 <= n <= N.
inline double q_symbol(const DetectorModel& d, int n, double t) {
    detail::check_t(t);
    if (n < 0 || n > d.n) throw std::invalid_argument("q_symbol: outcome out of range");
    if (d.kind == Kind::ClickArray) {
        return detail::binom(d.n, n) * detail::ipow(t, d.n - n) * detail::ipow(1.0 - t, n);
    }
    // PNR, u = -N ln t
    if (t == 0.0) return (n == d.n) ? 1.0 : 0.0;
    const double u = -d.n * std::log(t);
    if (n < d.n) return detail::poisson_term(n, u);
    double rest = 0.0;
    for (int k = 0; k < d.n; ++k) rest += detail::poisson_term(k, u);
    return 1.0 - rest;
}

/// Independent components Pi(0..N-1|t) as a vector (the last outcome is
/// dependent through normalization).
inline Vector q_vector(const DetectorModel& d, double t) {
    Vector v(d.n);
    for (int n = 0; n < d.n; ++n) v[n] = q_symbol(d, n, t);
    return v;
}

/// Closed-form derivative of the independent components with respect to t,
/// order 1 or 2. One-sided limits are used at the endpoints.
inline Vector q_vector_deriv(const DetectorModel& d, double t, int order) {
    detail::check_t(t);
    if (order != 1 && order != 2)
        throw std::invalid_argument("q_vector_deriv: order must be 1 or 2");
    Vector v(d.n);
    const int N = d.n;
    if (d.kind == Kind::ClickArray) {
        for (int n = 0; n < N; ++n) {
            const double c = detail::binom(N, n);
            if (order == 1) {
                double r = 0.0;
                if (N - n >= 1)
                    r += (N - n) * detail::ipow(t, N - n - 1) * detail::ipow(1.0 - t, n);
                if (n >= 1) r -= n * detail::ipow(t, N - n) * detail::ipow(1.0 - t, n - 1);
                v[n] = c * r;
            } else {
                double r = 0.0;
                if (N - n >= 2)
                    r += static_cast<double>(N - n) * (N - n - 1) * detail::ipow(t, N - n - 2) *
                         detail::ipow(1.0 - t, n);
                if (N - n >= 1 && n >= 1)
                    r -= 2.0 * n * (N - n) * detail::ipow(t, N - n - 1) *
                         detail::ipow(1.0 - t, n - 1);
                if (n >= 2)
                    r += static_cast<double>(n) * (n - 1) * detail::ipow(t, N - n) *
                         detail::ipow(1.0 - t, n - 2);
                v[n] = c * r;
            }
        }
        return v;
    }
    // PNR: Pi(n|t) = p_n(u), u = -N ln t, du/dt = -N/t.
    // d/dt = (-N/t) d/du; d2/dt2 = (N/t^2) d/du + (N^2/t^2) d2/du2.
    if (t == 0.0) {
        // e^{-u} = t^N dominates every polynomial factor; limits vanish for N >= 2.
        v.setZero();
        if (N == 1 && order == 1) v[0] = 1.0;  // Pi(0|t) = t for the single on-off case
        return v;
    }
    const double u = -N * std::log(t);
    for (int n = 0; n < N; ++n) {
        const double pu = detail::poisson_term_du(n, u);
        if (order == 1) {
            v[n] = -(N / t) * pu;
        } else {
            const double puu = detail::poisson_term_duu(n, u);
            v[n] = (N / (t * t)) * pu + (static_cast<double>(N) * N / (t * t)) * puu;
        }
    }
    return v;
}

/// Fock-basis diagonal elements <m|Pi_hat(n)|m> for m = 0..m_max.
/// Poisson-averaging these over |alpha|^2 reproduces q_symbol.
inline std::vector<double> povm_fock_diagonal(const DetectorModel& d, int n, int m_max) {
    if (n < 0 || n > d.n) throw std::invalid_argument("povm_fock_diagonal: outcome out of range");
    if (m_max < d.n) throw std::invalid_argument("povm_fock_diagonal: m_max must be >= N");
    std::vector<double> e(static_cast<size_t>(m_max) + 1, 0.0);
    if (d.kind == Kind::PnrTruncated) {
        if (n < d.n) {
            e[static_cast<size_t>(n)] = 1.0;
        } else {
            for (int m = d.n; m <= m_max; ++m) e[static_cast<size_t>(m)] = 1.0;
        }
        return e;
    }
    // Click array: m photons spread uniformly over N detectors; exactly n of
    // them fire. Inclusion-exclusion over the fired subset.
    const double c = detail::binom(d.n, n);
    for (int m = 0; m <= m_max; ++m) {
        double s = 0.0;
        for (int k = 0; k <= n; ++k) {
            const double term = detail::binom(n, k) *
                                detail::ipow(static_cast<double>(n - k) / d.n, m);
            s += (k % 2 == 0) ? term : -term;
        }
        e[static_cast<size_t>(m)] = std::min(1.0, std::max(0.0, c * s));
    }
    return e;
}

}  // namespace ncw::det
