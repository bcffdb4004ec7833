#pragma once

// Finite-sample estimation of inequality left-hand sides: multinomial draws
// and delta-method standard errors. The right-hand side is analytic and
// treated as noise-free.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "tight_photocount.hpp"

namespace ncw::sampling {

struct EmpiricalDist {
    std::vector<long> counts;  // per outcome
    long n_samples = 0;
    std::uint64_t seed = 0;
};

/// Multinomial draw from P, deterministic for a given seed. Implemented as
/// sequential binomial splitting so count order does not matter.
inline EmpiricalDist sample_counts(const Eigen::VectorXd& P, long n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("sample_counts: n_samples must be >= 1");
    std::mt19937_64 rng(seed);
    EmpiricalDist e;
    e.seed = seed;
    e.n_samples = n_samples;
    e.counts.assign(static_cast<size_t>(P.size()), 0);
    long remaining = n_samples;
    double mass = 1.0;
    for (Eigen::Index i = 0; i < P.size() && remaining > 0; ++i) {
        if (i == P.size() - 1) {
            e.counts[static_cast<size_t>(i)] = remaining;
            break;
        }
        double p = P[i] / mass;
        p = std::min(1.0, std::max(0.0, p));
        std::binomial_distribution<long> bin(remaining, p);
        const long c = bin(rng);
        e.counts[static_cast<size_t>(i)] = c;
        remaining -= c;
        mass -= P[i];
        if (mass <= 0.0) break;
    }
    return e;
}

struct MarginEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Plug-in estimate of the margin P_hat.lambda - rhs with the delta-method
/// standard error from the multinomial covariance of P_hat.
inline MarginEstimate estimate_margin(const EmpiricalDist& emp, const tight::TestFunction& tf) {
    const Eigen::Index n_lam = tf.lambda.size();
    if (static_cast<Eigen::Index>(emp.counts.size()) < n_lam)
        throw std::invalid_argument("estimate_margin: dimension mismatch");
    const double n = static_cast<double>(emp.n_samples);
    Eigen::VectorXd phat(static_cast<Eigen::Index>(emp.counts.size()));
    for (size_t i = 0; i < emp.counts.size(); ++i)
        phat[static_cast<Eigen::Index>(i)] = static_cast<double>(emp.counts[i]) / n;

    MarginEstimate me;
    me.value = phat.head(n_lam).dot(tf.lambda) - tf.rhs;
    // Var(lambda . P_hat) = (sum_i p_i l_i^2 - (sum_i p_i l_i)^2) / n
    double m1 = 0.0, m2 = 0.0;
    for (Eigen::Index i = 0; i < n_lam; ++i) {
        m1 += phat[i] * tf.lambda[i];
        m2 += phat[i] * tf.lambda[i] * tf.lambda[i];
    }
    const double var = std::max(0.0, (m2 - m1 * m1) / n);
    me.std_error = std::sqrt(var);
    return me;
}

}  // namespace ncw::sampling
