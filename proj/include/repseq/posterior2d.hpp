#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "repseq/seqmodels.hpp"

// Grid-based joint Bayesian inference on (mu, rho) from an aggregate
// replication count: the numerically computed Jeffreys prior, joint and
// marginal posteriors, and pairwise overlap matrices.

namespace repseq {

/// Normalized probability masses over a rectangular (mu, rho) grid,
/// row-major with mu as the slow index.
struct PosteriorGrid2D {
    std::vector<double> mu_nodes;
    std::vector<double> rho_nodes;
    std::vector<double> mass;

    double& at(std::size_t i_mu, std::size_t j_rho) {
        return mass[i_mu * rho_nodes.size() + j_rho];
    }
    double at(std::size_t i_mu, std::size_t j_rho) const {
        return mass[i_mu * rho_nodes.size() + j_rho];
    }
};

/// Prior over (mu, rho): uniform on both, joint Jeffreys, or uniform on mu
/// with rho fixed at a known value.
struct PriorSpec {
    enum class Kind { uniform, jeffreys, fixed_rho };
    Kind kind = Kind::uniform;
    double rho0 = 0.0;

    static PriorSpec uniform() { return {Kind::uniform, 0.0}; }
    static PriorSpec jeffreys() { return {Kind::jeffreys, 0.0}; }
    static PriorSpec fixed(double rho) {
        if (!(rho >= 0.0 && rho <= 1.0))
            throw std::domain_error("PriorSpec::fixed: rho must be in [0,1]");
        return {Kind::fixed_rho, rho};
    }
};

/// n interior nodes spanning [lo, 1-lo], built exactly mirror-symmetric:
/// node[i] + node[n-1-i] == 1 bitwise. n must be odd.
inline std::vector<double> symmetric_unit_grid(std::size_t n, double lo = 0.0025) {
    if (n < 3 || n % 2 == 0)
        throw std::domain_error("symmetric_unit_grid: n must be odd and >= 3");
    if (!(lo > 0.0 && lo < 0.5))
        throw std::domain_error("symmetric_unit_grid: lo must be in (0, 0.5)");
    std::vector<double> g(n);
    const double step = (1.0 - 2.0 * lo) / double(n - 1);
    const std::size_t mid = n / 2;
    g[mid] = 0.5;
    for (std::size_t i = mid + 1; i < n; ++i) {
        const double t = lo + double(i) * step;       // upper half, in [0.5, 1)
        g[i] = t;
        g[n - 1 - i] = 1.0 - t;                       // exact for t >= 0.5
    }
    return g;
}

namespace detail {

inline std::vector<double> betabinomial_log_pmf_vec(long m, double mu, double rho) {
    const BetaShape sh = beta_shape_from_mean_icc(mu, rho);
    const double lb0 = log_beta(sh.a, sh.b);
    std::vector<double> out(std::size_t(m) + 1);
    for (long x = 0; x <= m; ++x)
        out[std::size_t(x)] =
            log_choose(m, x) + log_beta(double(x) + sh.a, double(m - x) + sh.b) - lb0;
    return out;
}

// Magnitude of the lgamma terms entering the log PMF; sets the rounding
// noise scale of a finite-difference score.
inline double log_pmf_lgamma_scale(long m, double mu, double rho) {
    const BetaShape sh = beta_shape_from_mean_icc(mu, rho);
    return std::fabs(std::lgamma(sh.a)) + std::fabs(std::lgamma(sh.b)) +
           std::fabs(std::lgamma(double(m) + sh.a + sh.b)) +
           std::lgamma(double(m) + 1.0);
}

// sqrt(det I(mu, rho)) of the beta-binomial Fisher information, scores by
// central finite differences of the log PMF, expectation exact over x.
// A score component whose energy sits at the level of log-PMF rounding
// noise (the m = 1 case, where the verdict law is rho-free) counts as zero.
inline double jeffreys_density_node(long m, double mu, double rho, double h) {
    // det I is symmetric in mu about 1/2; evaluating on the lower half makes
    // the symmetry bitwise for exactly mirrored node pairs.
    if (mu > 0.5) mu = 1.0 - mu;
    const std::vector<double> l0 = betabinomial_log_pmf_vec(m, mu, rho);
    const std::vector<double> lmu_p = betabinomial_log_pmf_vec(m, mu + h, rho);
    const std::vector<double> lmu_m = betabinomial_log_pmf_vec(m, mu - h, rho);
    const std::vector<double> lro_p = betabinomial_log_pmf_vec(m, mu, rho + h);
    const std::vector<double> lro_m = betabinomial_log_pmf_vec(m, mu, rho - h);
    CompensatedSum i11, i22, i12;
    for (long x = 0; x <= m; ++x) {
        const std::size_t ix = std::size_t(x);
        const double p = std::exp(l0[ix]);
        const double smu = (lmu_p[ix] - lmu_m[ix]) / (2.0 * h);
        const double sro = (lro_p[ix] - lro_m[ix]) / (2.0 * h);
        i11.add(p * smu * smu);
        i22.add(p * sro * sro);
        i12.add(p * smu * sro);
    }
    constexpr double eps = 32.0 * std::numeric_limits<double>::epsilon();
    const double nmu = eps / (2.0 * h) *
                       (log_pmf_lgamma_scale(m, mu + h, rho) +
                        log_pmf_lgamma_scale(m, mu - h, rho) + 2.0);
    const double nro = eps / (2.0 * h) *
                       (log_pmf_lgamma_scale(m, mu, rho + h) +
                        log_pmf_lgamma_scale(m, mu, rho - h) + 2.0);
    if (i11.value() <= 4.0 * nmu * nmu || i22.value() <= 4.0 * nro * nro) return 0.0;
    const double det = i11.value() * i22.value() - i12.value() * i12.value();
    return det > 0.0 ? std::sqrt(det) : 0.0;
}

}  // namespace detail

/// Jeffreys prior sqrt(det I(mu, rho)) on the node grid, normalized to sum 1.
/// Row-major, mu outer. Finite-difference step must keep mu +/- h and
/// rho +/- h inside (0, 1).
inline std::vector<double> jeffreys_prior_grid(long m, std::span<const double> mu_nodes,
                                               std::span<const double> rho_nodes,
                                               double fd_step = 1e-4) {
    if (m < 1) throw std::domain_error("jeffreys_prior_grid: m must be >= 1");
    for (double v : mu_nodes)
        if (!(v - fd_step > 0.0 && v + fd_step < 1.0))
            throw std::domain_error("jeffreys_prior_grid: mu nodes must be inside (0,1)");
    for (double v : rho_nodes)
        if (!(v - fd_step > 0.0 && v + fd_step < 1.0))
            throw std::domain_error("jeffreys_prior_grid: rho nodes must be inside (0,1)");
    std::vector<double> prior(mu_nodes.size() * rho_nodes.size());
    for (std::size_t i = 0; i < mu_nodes.size(); ++i)
        for (std::size_t j = 0; j < rho_nodes.size(); ++j)
            prior[i * rho_nodes.size() + j] =
                detail::jeffreys_density_node(m, mu_nodes[i], rho_nodes[j], fd_step);
    detail::CompensatedSum tot;
    for (double v : prior) tot.add(v);
    const double t = tot.value();
    if (t <= 0.0) throw std::runtime_error("jeffreys_prior_grid: prior mass vanished");
    for (double& v : prior) v /= t;
    return prior;
}

/// Joint grid posterior p(mu, rho | x, m) under the given prior. With
/// fixed_rho the rho dimension collapses to the single node rho0.
inline PosteriorGrid2D joint_posterior(long x, long m, const PriorSpec& prior,
                                       std::span<const double> mu_nodes,
                                       std::span<const double> rho_nodes) {
    if (x < 0 || x > m) throw std::domain_error("joint_posterior: x must be in 0..m");
    PosteriorGrid2D post;
    post.mu_nodes.assign(mu_nodes.begin(), mu_nodes.end());
    if (prior.kind == PriorSpec::Kind::fixed_rho)
        post.rho_nodes = {prior.rho0};
    else
        post.rho_nodes.assign(rho_nodes.begin(), rho_nodes.end());

    const std::size_t nr = post.rho_nodes.size();
    post.mass.assign(post.mu_nodes.size() * nr, 0.0);

    std::vector<double> prior_mass;
    if (prior.kind == PriorSpec::Kind::jeffreys)
        prior_mass = jeffreys_prior_grid(m, post.mu_nodes, post.rho_nodes);

    for (std::size_t i = 0; i < post.mu_nodes.size(); ++i) {
        for (std::size_t j = 0; j < nr; ++j) {
            const double like =
                betabinomial_pmf({post.mu_nodes[i], post.rho_nodes[j], m}, x);
            const double pr =
                prior.kind == PriorSpec::Kind::jeffreys ? prior_mass[i * nr + j] : 1.0;
            post.mass[i * nr + j] = like * pr;
        }
    }
    detail::CompensatedSum tot;
    for (double v : post.mass) tot.add(v);
    const double t = tot.value();
    if (t <= 0.0) throw std::runtime_error("joint_posterior: posterior mass vanished");
    for (double& v : post.mass) v /= t;
    return post;
}

/// Marginal posterior masses of mu: row sums over the rho nodes.
inline std::vector<double> marginal_mu(const PosteriorGrid2D& post) {
    const std::size_t nr = post.rho_nodes.size();
    std::vector<double> marg(post.mu_nodes.size());
    for (std::size_t i = 0; i < post.mu_nodes.size(); ++i) {
        detail::CompensatedSum s;
        for (std::size_t j = 0; j < nr; ++j) s.add(post.mass[i * nr + j]);
        marg[i] = s.value();
    }
    return marg;
}

/// Probability mass overlap sum(min(p_i, q_i)) of two mass vectors on a
/// common grid; equals 1 minus the total variation distance.
inline double overlap(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw std::invalid_argument("overlap: mass vectors must have equal length");
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < p.size(); ++i) s.add(std::min(p[i], q[i]));
    return s.value();
}

/// Pairwise overlap matrix between marginal posteriors of mu at observed
/// counts x_i = round(m mu_i). Symmetric with unit diagonal, row-major.
inline std::vector<double> overlap_matrix(std::span<const double> mu_values, long m,
                                          const PriorSpec& prior,
                                          std::span<const double> mu_nodes,
                                          std::span<const double> rho_nodes) {
    const std::size_t nv = mu_values.size();
    std::vector<std::vector<double>> margs(nv);
    std::vector<double> prior_mass;
    if (prior.kind == PriorSpec::Kind::jeffreys)
        prior_mass = jeffreys_prior_grid(m, mu_nodes, rho_nodes);
    for (std::size_t v = 0; v < nv; ++v) {
        const long x = std::lround(double(m) * mu_values[v]);
        if (prior.kind == PriorSpec::Kind::jeffreys) {
            // reuse the one Jeffreys grid across targets
            PosteriorGrid2D post;
            post.mu_nodes.assign(mu_nodes.begin(), mu_nodes.end());
            post.rho_nodes.assign(rho_nodes.begin(), rho_nodes.end());
            const std::size_t nr = rho_nodes.size();
            post.mass.assign(mu_nodes.size() * nr, 0.0);
            for (std::size_t i = 0; i < mu_nodes.size(); ++i)
                for (std::size_t j = 0; j < nr; ++j)
                    post.mass[i * nr + j] =
                        betabinomial_pmf({mu_nodes[i], rho_nodes[j], m}, x) *
                        prior_mass[i * nr + j];
            detail::CompensatedSum tot;
            for (double w : post.mass) tot.add(w);
            for (double& w : post.mass) w /= tot.value();
            margs[v] = marginal_mu(post);
        } else {
            margs[v] = marginal_mu(joint_posterior(x, m, prior, mu_nodes, rho_nodes));
        }
    }
    std::vector<double> mat(nv * nv, 1.0);
    for (std::size_t i = 0; i < nv; ++i) {
        for (std::size_t j = i + 1; j < nv; ++j) {
            const double ov = overlap(margs[i], margs[j]);
            mat[i * nv + j] = ov;
            mat[j * nv + i] = ov;
        }
    }
    return mat;
}

}  // namespace repseq
