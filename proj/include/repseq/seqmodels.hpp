#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "repseq/specfun.hpp"

// Benchmark and operational models of a replication sequence: the
// beta-binomial law of the aggregate verdict count, the variance of the
// estimated mean rate under both models, and the effective sample size.

namespace repseq {

/// Parameters of a replication sequence: mean replicability rate mu,
/// intraclass correlation rho, and the number of replications m.
struct SequenceParams {
    double mu;
    double rho;
    long m;

    void validate() const {
        if (!(mu >= 0.0 && mu <= 1.0))
            throw std::domain_error("SequenceParams: mu must be in [0,1]");
        if (!(rho >= 0.0 && rho <= 1.0))
            throw std::domain_error("SequenceParams: rho must be in [0,1]");
        if (m < 1) throw std::domain_error("SequenceParams: m must be >= 1");
    }
};

/// Per-experiment exact-replication counts k_i of the operational model.
struct OperationalDesign {
    std::vector<long> k;

    void validate() const {
        if (k.empty()) throw std::domain_error("OperationalDesign: k must be non-empty");
        for (long ki : k)
            if (ki < 1) throw std::domain_error("OperationalDesign: every k_i must be >= 1");
    }
};

/// Two-point mixing distribution: phi = mu +/- delta with probability 1/2.
struct TwoPointMixture {
    double mu;
    double delta;

    void validate() const {
        if (!(delta > 0.0 && mu - delta > 0.0 && mu + delta < 1.0))
            throw std::domain_error("TwoPointMixture: need 0 < mu-delta and mu+delta < 1");
    }
};

namespace detail {

// Log PMF of the beta-binomial count at x, for mu strictly inside (0,1) and
// rho strictly inside (0,1). Computed through log-beta ratios.
inline double betabinomial_log_pmf_raw(long m, long x, double mu, double rho) {
    const BetaShape sh = beta_shape_from_mean_icc(mu, rho);
    return log_choose(m, x) + log_beta(double(x) + sh.a, double(m - x) + sh.b) -
           log_beta(sh.a, sh.b);
}

}  // namespace detail

/// PMF of the number of replicated results under the benchmark model.
/// rho = 0 delegates to the exact binomial; rho = 1 is the two-point mass at
/// x in {0, m}. Values for mu > 1/2 are evaluated through the x <-> m-x
/// reflection so the PMF is bitwise symmetric in (mu, x) <-> (1-mu, m-x).
inline double betabinomial_pmf(const SequenceParams& params, long x) {
    params.validate();
    if (x < 0 || x > params.m)
        throw std::domain_error("betabinomial_pmf: x must be in 0..m");
    const long m = params.m;
    double mu = params.mu;
    if (mu > 0.5) {
        mu = 1.0 - mu;  // exact for mu >= 1/2
        x = m - x;
    }
    if (params.rho >= 1.0) {
        if (x == 0) return 1.0 - mu;
        if (x == m) return mu;
        return 0.0;
    }
    // Below (m-1)rho ~ 1e-10 the overdispersion is beneath the PMF's own
    // accuracy target while the log-beta route starts cancelling (shape
    // parameters ~ 1/rho); delegate to the exact binomial there.
    if (params.rho <= 0.0 || (double(m) - 1.0) * params.rho <= 1e-10 || mu <= 0.0 ||
        mu >= 1.0)
        return std::exp(binomial_log_pmf(m, x, mu));
    return std::exp(detail::betabinomial_log_pmf_raw(m, x, mu, params.rho));
}

/// Full PMF table over x = 0..m.
inline std::vector<double> betabinomial_pmf_table(const SequenceParams& params) {
    params.validate();
    std::vector<double> p(std::size_t(params.m) + 1);
    for (long x = 0; x <= params.m; ++x) p[std::size_t(x)] = betabinomial_pmf(params, x);
    return p;
}

/// Variance of mu_hat = X/m under the benchmark model:
/// mu(1-mu)[1/m + (m-1)/m * rho].
inline double benchmark_variance(const SequenceParams& params) {
    params.validate();
    const double mm = double(params.m);
    return params.mu * (1.0 - params.mu) * (1.0 / mm + (mm - 1.0) / mm * params.rho);
}

/// Irreducible variance floor mu(1-mu)rho, the m -> infinity limit of the
/// benchmark variance.
inline double variance_floor(double mu, double rho) {
    if (!(mu >= 0.0 && mu <= 1.0 && rho >= 0.0 && rho <= 1.0))
        throw std::domain_error("variance_floor: mu and rho must be in [0,1]");
    return mu * (1.0 - mu) * rho;
}

/// Intraclass correlation implied by a two-point mixture: delta^2/[mu(1-mu)].
inline double two_point_icc(const TwoPointMixture& mix) {
    mix.validate();
    return mix.delta * mix.delta / (mix.mu * (1.0 - mix.mu));
}

/// Variance of mu_hat under the operational model:
/// mu(1-mu)[(1-rho)/m^2 * sum_i 1/k_i + rho/m].
inline double operational_variance(double mu, double rho, const OperationalDesign& design) {
    design.validate();
    if (!(mu >= 0.0 && mu <= 1.0 && rho >= 0.0 && rho <= 1.0))
        throw std::domain_error("operational_variance: mu and rho must be in [0,1]");
    const double mm = double(design.k.size());
    detail::CompensatedSum inv;
    for (long ki : design.k) inv.add(1.0 / double(ki));
    return mu * (1.0 - mu) * ((1.0 - rho) / (mm * mm) * inv.value() + rho / mm);
}

/// Excess variance of the operational model at uniform finite k over the
/// k -> infinity limit: mu(1-mu)(1-rho)/(m k).
inline double excess_variance(double mu, double rho, long k, long m) {
    if (k < 1 || m < 1) throw std::domain_error("excess_variance: k and m must be >= 1");
    if (!(mu >= 0.0 && mu <= 1.0 && rho >= 0.0 && rho <= 1.0))
        throw std::domain_error("excess_variance: mu and rho must be in [0,1]");
    return mu * (1.0 - mu) * (1.0 - rho) / (double(m) * double(k));
}

/// Effective number of independent replications m_e = m/[1 + (m-1)rho].
/// Returned unrounded.
inline double effective_sample_size(long m, double rho) {
    if (m < 1) throw std::domain_error("effective_sample_size: m must be >= 1");
    if (!(rho >= 0.0 && rho <= 1.0))
        throw std::domain_error("effective_sample_size: rho must be in [0,1]");
    return double(m) / (1.0 + (double(m) - 1.0) * rho);
}

}  // namespace repseq
