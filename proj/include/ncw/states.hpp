#pragma once

// Photon-number statistics of the example states under loss, photocounting
// statistics via Born's rule, and coherent-overlap probabilities for
// unbalanced homodyne detection.
//
// Conventions: quadratures q = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)),
// vacuum covariance I/2. The squeeze operator S(z), z = r e^{i theta},
// squeezes the quadrature at angle theta/2; for theta = 0 the variances are
// (e^{-2r}/2, e^{+2r}/2). Losses are applied to the states: binomial
// convolution of the photon-number distribution, or the Gaussian channel
// V -> eta V + (1-eta) I/2, mean -> sqrt(eta) mean.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "detectors.hpp"

namespace ncw::states {

using Complex = std::complex<double>;

enum class Kind { FockWithLoss, Coherent, SqueezedCoherent };

struct StateSpec {
    Kind kind = Kind::Coherent;
    int fock_n = 0;            // FockWithLoss
    Complex alpha0 = 0.0;      // Coherent / SqueezedCoherent displacement
    double r = 0.0;            // squeezing magnitude
    double phase = 0.0;        // squeezing phase theta (squeezed quadrature at theta/2)
    double eta = 1.0;          // efficiency in (0,1]

    void validate() const {
        if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must be in (0,1]");
        if (r < 0.0) throw std::invalid_argument("squeezing r must be >= 0");
        if (fock_n < 0) throw std::invalid_argument("Fock n must be >= 0");
    }
};

inline StateSpec fock_with_loss(int n, double eta) {
    StateSpec s;
    s.kind = Kind::FockWithLoss;
    s.fock_n = n;
    s.eta = eta;
    s.validate();
    return s;
}

inline StateSpec coherent(Complex alpha0, double eta = 1.0) {
    StateSpec s;
    s.kind = Kind::Coherent;
    s.alpha0 = alpha0;
    s.eta = eta;
    s.validate();
    return s;
}

inline StateSpec squeezed_coherent(Complex alpha0, double r, double phase, double eta = 1.0) {
    StateSpec s;
    s.kind = Kind::SqueezedCoherent;
    s.alpha0 = alpha0;
    s.r = r;
    s.phase = phase;
    s.eta = eta;
    s.validate();
    return s;
}

/// Displacement along the real axis with the squeezed quadrature orthogonal
/// to it (antisqueezing along the displacement).
inline StateSpec phase_squeezed_coherent(double alpha0, double r, double eta = 1.0) {
    return squeezed_coherent(alpha0, r, std::numbers::pi, eta);
}

/// Squeezed vacuum with antisqueezing along the real axis.
inline StateSpec squeezed_vacuum_antisqueezed_x(double r, double eta = 1.0) {
    return squeezed_coherent(0.0, r, std::numbers::pi, eta);
}

struct PhotonNumberDist {
    std::vector<double> p;  // p[m] = rho_mm, m = 0..m_max
    double tail_mass = 0.0;
};

struct truncation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

// Fock amplitudes of D(alpha)S(z)|0>, z = r e^{i theta}, via the recurrence
// from (cosh r a + e^{i theta} sinh r a^dag) |psi> = beta |psi>,
// beta = alpha cosh r + conj(alpha) e^{i theta} sinh r.
inline std::vector<Complex> squeezed_coherent_amplitudes(Complex alpha, double r, double theta,
                                                         int m_max) {
    const double mu = std::cosh(r);
    const Complex nu = std::polar(std::sinh(r), theta);
    const Complex beta = alpha * mu + std::conj(alpha) * nu;
    std::vector<Complex> c(static_cast<size_t>(m_max) + 1);
    // <0|D(alpha)S(z)|0> = exp(-|alpha|^2/2 - conj(alpha)^2 e^{i theta} tanh r / 2)/sqrt(cosh r)
    const Complex a2 = std::conj(alpha) * std::conj(alpha);
    c[0] = std::exp(-0.5 * std::norm(alpha) - 0.5 * a2 * nu / mu) / std::sqrt(mu);
    if (m_max >= 1) c[1] = beta * c[0] / mu;
    for (int m = 1; m < m_max; ++m) {
        c[static_cast<size_t>(m) + 1] =
            (beta * c[static_cast<size_t>(m)] - nu * std::sqrt(static_cast<double>(m)) *
                                                    c[static_cast<size_t>(m) - 1]) /
            (mu * std::sqrt(static_cast<double>(m) + 1.0));
    }
    return c;
}

// Binomial loss channel on a diagonal photon-number distribution.
// Log-gamma form so extreme eta does not underflow the recurrence.
inline std::vector<double> binomial_loss(const std::vector<double>& p, double eta) {
    if (eta == 1.0) return p;
    const size_t n = p.size();
    const double le = std::log(eta), lq = std::log1p(-eta);
    std::vector<double> out(n, 0.0);
    for (size_t m = 0; m < n; ++m) {
        if (p[m] == 0.0) continue;
        const double lm = std::lgamma(static_cast<double>(m) + 1.0);
        for (size_t k = 0; k <= m; ++k) {
            const double lp = lm - std::lgamma(static_cast<double>(k) + 1.0) -
                              std::lgamma(static_cast<double>(m - k) + 1.0) +
                              static_cast<double>(k) * le + static_cast<double>(m - k) * lq;
            out[k] += p[m] * std::exp(lp);
        }
    }
    return out;
}

// Mean vector (sqrt(2) Re, sqrt(2) Im) and quadrature covariance of a
// Gaussian StateSpec, with the loss channel applied.
inline void gaussian_moments(const StateSpec& s, Eigen::Vector2d& mean, Eigen::Matrix2d& cov) {
    if (s.kind == Kind::FockWithLoss && s.fock_n != 0)
        throw std::invalid_argument("gaussian_moments: state is not Gaussian");
    mean = {std::sqrt(2.0) * s.alpha0.real(), std::sqrt(2.0) * s.alpha0.imag()};
    cov = 0.5 * Eigen::Matrix2d::Identity();
    if (s.kind == Kind::SqueezedCoherent && s.r > 0.0) {
        const double ch = s.phase / 2.0;
        Eigen::Matrix2d rot;
        rot << std::cos(ch), -std::sin(ch), std::sin(ch), std::cos(ch);
        Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
        d(0, 0) = 0.5 * std::exp(-2.0 * s.r);
        d(1, 1) = 0.5 * std::exp(2.0 * s.r);
        cov = rot * d * rot.transpose();
    }
    if (s.eta < 1.0) {
        cov = s.eta * cov + 0.5 * (1.0 - s.eta) * Eigen::Matrix2d::Identity();
        mean *= std::sqrt(s.eta);
    }
}

}  // namespace detail

/// Diagonal photon-number distribution of the state truncated at m_max.
/// Throws truncation_error if the tail mass exceeds 1e-12.
inline PhotonNumberDist photon_number_dist(const StateSpec& s, int m_max) {
    s.validate();
    if (m_max < 0) throw std::invalid_argument("photon_number_dist: m_max must be >= 0");
    PhotonNumberDist d;
    switch (s.kind) {
        case Kind::FockWithLoss: {
            std::vector<double> p(static_cast<size_t>(std::max(m_max, s.fock_n)) + 1, 0.0);
            p[static_cast<size_t>(s.fock_n)] = 1.0;
            p = detail::binomial_loss(p, s.eta);
            p.resize(static_cast<size_t>(m_max) + 1, 0.0);
            d.p = std::move(p);
            break;
        }
        case Kind::Coherent: {
            const double u = s.eta * std::norm(s.alpha0);
            d.p.resize(static_cast<size_t>(m_max) + 1);
            double term = std::exp(-u);
            for (int m = 0; m <= m_max; ++m) {
                d.p[static_cast<size_t>(m)] = term;
                term *= u / (m + 1);
            }
            break;
        }
        case Kind::SqueezedCoherent: {
            // Lossless amplitudes on an extended grid, then binomial loss.
            const int ext = std::max(m_max + 40, 2 * m_max);
            auto c = detail::squeezed_coherent_amplitudes(s.alpha0, s.r, s.phase, ext);
            std::vector<double> p(c.size());
            for (size_t m = 0; m < c.size(); ++m) p[m] = std::norm(c[m]);
            p = detail::binomial_loss(p, s.eta);
            p.resize(static_cast<size_t>(m_max) + 1, 0.0);
            d.p = std::move(p);
            break;
        }
    }
    double sum = 0.0;
    for (double v : d.p) sum += v;
    d.tail_mass = std::max(0.0, 1.0 - sum);
    if (d.tail_mass > 1e-12)
        throw truncation_error("photon_number_dist: tail mass " + std::to_string(d.tail_mass) +
                               " exceeds 1e-12; increase m_max");
    return d;
}

/// Smallest truncation with tail mass below 1e-12, capped at 400.
inline int default_m_max(const StateSpec& s) {
    for (int m = 8; m <= 400; m = m * 2) {
        PhotonNumberDist d;
        try {
            d = photon_number_dist(s, m);
        } catch (const truncation_error&) {
            continue;
        }
        // shrink to the first index where the cumulative tail drops below 1e-13
        double tail = d.tail_mass;
        int cut = m;
        for (int i = m; i > 0; --i) {
            tail += d.p[static_cast<size_t>(i)];
            if (tail > 1e-13) break;
            cut = i;
        }
        return cut;
    }
    return 400;
}

/// Photocounting distribution P(0..N) through Born's rule.
inline Eigen::VectorXd photocount_dist(const StateSpec& s, const det::DetectorModel& dm,
                                       int m_max = -1) {
    if (m_max < 0) m_max = std::max(default_m_max(s), dm.n);
    const auto pnd = photon_number_dist(s, m_max);
    Eigen::VectorXd P = Eigen::VectorXd::Zero(dm.n + 1);
    for (int n = 0; n <= dm.n; ++n) {
        const auto elem = det::povm_fock_diagonal(dm, n, m_max);
        double acc = 0.0;
        for (int m = 0; m <= m_max; ++m) acc += pnd.p[static_cast<size_t>(m)] * elem[static_cast<size_t>(m)];
        P[n] = acc;
    }
    const double norm_err = std::abs(P.sum() - 1.0);
    if (norm_err > 1e-10)
        throw truncation_error("photocount_dist: normalization off by " + std::to_string(norm_err));
    return P;
}

/// No-click probability of unbalanced homodyne detection with local-oscillator
/// amplitude gamma: <gamma|rho|gamma>. Gaussian states go through the Husimi
/// formula; lossy Fock states through the Fock-basis sum.
inline double uhd_click_prob(const StateSpec& s, Complex gamma) {
    s.validate();
    if (s.kind == Kind::FockWithLoss) {
        const int m_max = std::max(default_m_max(s), 1);
        const auto pnd = photon_number_dist(s, m_max);
        const double g2 = std::norm(gamma);
        double acc = 0.0;
        double term = std::exp(-g2);
        for (int m = 0; m <= m_max; ++m) {
            acc += pnd.p[static_cast<size_t>(m)] * term;
            term *= g2 / (m + 1);
        }
        return acc;
    }
    Eigen::Vector2d mean;
    Eigen::Matrix2d cov;
    detail::gaussian_moments(s, mean, cov);
    const Eigen::Matrix2d sigma = cov + 0.5 * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d dvec =
        Eigen::Vector2d{std::sqrt(2.0) * gamma.real(), std::sqrt(2.0) * gamma.imag()} - mean;
    const double quad = dvec.dot(sigma.inverse() * dvec);
    return std::exp(-0.5 * quad) / std::sqrt(sigma.determinant());
}

/// Fock-basis route for the same probability: sum_k |<gamma|A_k|psi>|^2 over
/// the loss-channel Kraus operators. Independent of the Gaussian formula.
inline double uhd_click_prob_fock(const StateSpec& s, Complex gamma, int m_max = 120) {
    s.validate();
    std::vector<Complex> c;
    if (s.kind == Kind::FockWithLoss) {
        c.assign(static_cast<size_t>(m_max) + 1, 0.0);
        if (s.fock_n <= m_max) c[static_cast<size_t>(s.fock_n)] = 1.0;
    } else if (s.kind == Kind::Coherent) {
        c.resize(static_cast<size_t>(m_max) + 1);
        Complex amp = std::exp(-0.5 * std::norm(s.alpha0));
        for (int m = 0; m <= m_max; ++m) {
            c[static_cast<size_t>(m)] = amp;
            amp *= s.alpha0 / std::sqrt(static_cast<double>(m) + 1.0);
        }
    } else {
        c = detail::squeezed_coherent_amplitudes(s.alpha0, s.r, s.phase, m_max);
    }
    // <gamma|m> = e^{-|g|^2/2} conj(gamma)^m / sqrt(m!)
    std::vector<Complex> bra(static_cast<size_t>(m_max) + 1);
    Complex b = std::exp(-0.5 * std::norm(gamma));
    for (int m = 0; m <= m_max; ++m) {
        bra[static_cast<size_t>(m)] = b;
        b *= std::conj(gamma) / std::sqrt(static_cast<double>(m) + 1.0);
    }
    const double eta = s.eta;
    double total = 0.0;
    for (int k = 0; k <= m_max; ++k) {
        // (A_k |psi>)_m = sqrt((1-eta)^k / k!) eta^{m/2} sqrt((m+k)!/m!) c_{m+k}
        double pref = 1.0;
        for (int i = 1; i <= k; ++i) pref *= (1.0 - eta) / i;
        if (pref == 0.0) break;
        Complex overlap = 0.0;
        for (int m = 0; m + k <= m_max; ++m) {
            double fac = std::pow(eta, 0.5 * m);
            for (int i = m + 1; i <= m + k; ++i) fac *= std::sqrt(static_cast<double>(i));
            overlap += bra[static_cast<size_t>(m)] * fac * c[static_cast<size_t>(m) + k];
        }
        total += pref * std::norm(overlap);
        if (eta == 1.0) break;
    }
    return total;
}

}  // namespace ncw::states
