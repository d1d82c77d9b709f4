#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "repseq/specfun.hpp"

// Generative heterogeneity examples mapping physical sources of
// non-exactness to (mu, rho): population heterogeneity across experiments
// and stimulus delivery bias/noise, in large-n and finite-n regimes.

namespace repseq {

/// Thrown when a quadrature fails its node-doubling validation.
struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Population heterogeneity scenario: common effect theta, between-experiment
/// SD sigma, within-experiment standard error se.
struct PopulationScenario {
    double theta;
    double sigma;
    double se;

    void validate() const {
        if (!(se > 0.0)) throw std::domain_error("PopulationScenario: se must be > 0");
        if (!(sigma >= 0.0)) throw std::domain_error("PopulationScenario: sigma must be >= 0");
    }
};

/// Stimulus delivery scenario on the standardized scale: intended stimulus u,
/// delivery bias b/tau and noise sigma/tau, optional per-experiment sample
/// size n with decision threshold `critical` for the finite-n mapping.
struct DeliveryScenario {
    double u;
    double bias;
    double noise;
    std::optional<long> n;
    double critical = 0.59;
    double alpha = 0.0;  // informational test size, not used in computation

    void validate() const {
        if (!(noise >= 0.0)) throw std::domain_error("DeliveryScenario: noise must be >= 0");
        if (n && !(*n >= 1)) throw std::domain_error("DeliveryScenario: n must be >= 1");
        if (n && !(critical > 0.0 && critical < 1.0))
            throw std::domain_error("DeliveryScenario: critical must be in (0,1)");
    }
};

/// Mean replicability rate under population heterogeneity:
/// mu = Phi(theta / sqrt(se^2 + sigma^2)).
inline double ex1_mu(const PopulationScenario& s) {
    s.validate();
    return normal_cdf(s.theta / std::sqrt(s.se * s.se + s.sigma * s.sigma));
}

/// Implied intraclass correlation: rho = (Phi2(h, h; r) - mu^2) / (mu(1-mu))
/// with h = theta/sqrt(se^2+sigma^2) and r = sigma^2/(se^2+sigma^2).
/// sigma = 0 is the degenerate exact-replication case with rho = 0.
inline double ex1_rho(const PopulationScenario& s) {
    s.validate();
    if (s.sigma == 0.0) return 0.0;
    const double v = s.se * s.se + s.sigma * s.sigma;
    const double h = s.theta / std::sqrt(v);
    const double r = s.sigma * s.sigma / v;
    const double mu = normal_cdf(h);
    const double e2 = bivariate_normal_cdf(h, h, r);
    const double rho = (e2 - mu * mu) / (mu * (1.0 - mu));
    return std::min(1.0, std::max(0.0, rho));
}

/// Label of the sensitivity panel nearest to a given rho: "~A" below 0.025,
/// "B".."F" for the 0.05-spaced regimes (ties at midpoints go to the lower
/// panel, matching the published tables), ">F" above 0.275.
inline std::string panel_label(double rho) {
    if (rho < 0.025) return "~A";
    if (rho <= 0.075) return "B";
    if (rho <= 0.125) return "C";
    if (rho <= 0.175) return "D";
    if (rho <= 0.225) return "E";
    if (rho <= 0.275) return "F";
    return ">F";
}

struct Ex1Cell {
    double theta;
    double sigma;
    double mu;
    double rho;
    std::string panel;
};

/// The population-heterogeneity table: one cell per (theta, sigma) pair at a
/// common within-experiment standard error.
inline std::vector<Ex1Cell> ex1_table(std::span<const double> theta_list,
                                      std::span<const double> sigma_list, double se) {
    std::vector<Ex1Cell> cells;
    cells.reserve(theta_list.size() * sigma_list.size());
    for (double sig : sigma_list) {
        for (double th : theta_list) {
            const PopulationScenario s{th, sig, se};
            const double mu = ex1_mu(s);
            const double rho = ex1_rho(s);
            cells.push_back({th, sig, mu, rho, panel_label(rho)});
        }
    }
    return cells;
}

/// Large-n mean rate under delivery error:
/// mu = Phi((u + b/tau) / sqrt(1 + (sigma/tau)^2)). The formula coincides
/// with ex1_mu at theta = u + b/tau, sigma = noise, se = 1.
inline double ex2_mu_largen(const DeliveryScenario& s) {
    s.validate();
    if (s.n) throw std::domain_error("ex2_mu_largen: scenario must be large-n (n absent)");
    return ex1_mu({s.u + s.bias, s.noise, 1.0});
}

/// Large-n intraclass correlation under delivery error; same mathematical
/// form as ex1_rho on the shifted stimulus.
inline double ex2_rho_largen(const DeliveryScenario& s) {
    s.validate();
    if (s.n) throw std::domain_error("ex2_rho_largen: scenario must be large-n (n absent)");
    return ex1_rho({s.u + s.bias, s.noise, 1.0});
}

namespace detail {

// Eigenvalues of a symmetric tridiagonal matrix by the implicit-shift QL
// algorithm; d is the diagonal, e the subdiagonal (e[i] couples i and i+1).
inline void tridiag_eigenvalues(std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = d.size();
    if (n == 0) return;
    e.resize(n, 0.0);
    e[n - 1] = 0.0;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
                if (std::fabs(e[m]) <= eps * dd) break;
            }
            if (m != l) {
                if (iter++ == 50)
                    throw std::runtime_error("tridiag_eigenvalues: no convergence");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                long i;
                for (i = long(m) - 1; i >= long(l); --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if (r == 0.0 && i >= long(l)) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

}  // namespace detail

/// Gauss-Hermite rule for the weight exp(-x^2) on (-inf, inf). Nodes are the
/// eigenvalues of the Jacobi matrix (Golub-Welsch), polished by Newton on the
/// orthonormal recurrence; weights come from the Christoffel function. The
/// recurrence tracks a power-of-two exponent so node counts in the thousands
/// stay finite.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;

    static GaussHermite compute(std::size_t n) {
        if (n < 1) throw std::domain_error("GaussHermite: n must be >= 1");
        std::vector<double> d(n, 0.0), e(n, 0.0);
        for (std::size_t j = 1; j < n; ++j) e[j - 1] = std::sqrt(double(j) / 2.0);
        detail::tridiag_eigenvalues(d, e);
        std::sort(d.begin(), d.end());

        GaussHermite rule;
        rule.nodes.assign(n, 0.0);
        rule.weights.assign(n, 0.0);
        const double pim4 = 0.75112554446494248286;  // pi^{-1/4}

        // Evaluates the orthonormal polynomials at z, returning p_n and
        // p_{n-1} plus Sum_{j<n} p_j^2, all scaled by 2^scale_exp.
        struct Eval {
            double pn, pn1, sum;
            int scale_exp;
        };
        const auto eval = [&](double z) {
            double p1 = pim4, p2 = 0.0;
            double sum = p1 * p1;
            int exp2 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / double(j)) * p2 -
                     std::sqrt(double(j - 1) / double(j)) * p3;
                if (j < n) sum += p1 * p1;
                if (std::fabs(p1) > 1e150 || std::fabs(p2) > 1e150) {
                    p1 = std::ldexp(p1, -500);
                    p2 = std::ldexp(p2, -500);
                    sum = std::ldexp(sum, -1000);
                    exp2 += 500;
                }
            }
            return Eval{p1, p2, sum, exp2};
        };

        const std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i < half; ++i) {
            // exploit symmetry: average the +/- eigenvalue pair
            double z = 0.5 * (d[n - 1 - i] - d[i]);
            if (2 * i + 1 == n) z = 0.0;
            for (int it = 0; it < 4 && z != 0.0; ++it) {
                const Eval ev = eval(z);
                const double dz = ev.pn / (std::sqrt(2.0 * double(n)) * ev.pn1);
                z -= dz;
                if (std::fabs(dz) < 1e-15 * std::fabs(z)) break;
            }
            const Eval ev = eval(z);
            const double w = std::ldexp(1.0 / ev.sum, -2 * ev.scale_exp);
            rule.nodes[i] = -z;
            rule.nodes[n - 1 - i] = z;
            rule.weights[i] = w;
            rule.weights[n - 1 - i] = w;
        }
        return rule;
    }

    /// Shared cache; rules are immutable once built.
    static const GaussHermite& cached(std::size_t n) {
        static std::map<std::size_t, GaussHermite> cache;
        static std::mutex mtx;
        std::lock_guard<std::mutex> lock(mtx);
        auto it = cache.find(n);
        if (it == cache.end()) it = cache.emplace(n, compute(n)).first;
        return it->second;
    }
};

/// Result of the finite-n mapping; rho is absent on cells where mu is
/// indistinguishable from 1 (the published tables mark these "---").
struct FiniteNMuRho {
    double mu;
    std::optional<double> rho;
};

/// Threshold below which 1 - mu is treated as exactly 1 for the undefined-rho
/// marker. Recorded in output metadata.
inline constexpr double kUndefinedRhoEps = 1e-9;

namespace detail {

inline FiniteNMuRho ex2_finite_n_at(const DeliveryScenario& s, std::size_t nodes) {
    const GaussHermite& gh = GaussHermite::cached(nodes);
    const long n = *s.n;
    const long c = long(std::ceil(double(n) * s.critical - 1e-9));  // guard binary noise in n*c
    // E[g(d)] for d ~ N(bias, noise^2) via x = (d - bias)/(sqrt(2) noise).
    // Accumulate the lower tail L = P(X <= c-1 | p(d)) so cells with mu
    // near 1 keep full precision.
    CompensatedSum sq, sq2;
    for (std::size_t i = 0; i < nodes; ++i) {
        const double d = s.bias + kSqrt2 * s.noise * gh.nodes[i];
        const double low = binomial_lower_cdf(n, c - 1, normal_cdf(s.u + d));
        sq.add(gh.weights[i] * low);
        sq2.add(gh.weights[i] * low * low);
    }
    const double inv_sqrt_pi = 0.56418958354775628695;
    const double q = sq.value() * inv_sqrt_pi;    // E[1 - phi]
    const double q2 = sq2.value() * inv_sqrt_pi;  // E[(1 - phi)^2]
    const double mu = 1.0 - q;
    if (q < kUndefinedRhoEps || q > 1.0 - 1e-15) return {mu, std::nullopt};
    const double var = std::max(0.0, q2 - q * q);
    const double rho = std::min(1.0, var / (mu * q));
    return {mu, rho};
}

}  // namespace detail

/// Finite-n mapping of a delivery scenario: phi(d) is the exact power of the
/// one-sided binomial test at response probability Phi(u + d), and (mu, rho)
/// are Gauss-Hermite expectations over d ~ N(bias, noise^2). The result is
/// validated by node doubling; a shift above 1e-6 raises convergence_error.
inline FiniteNMuRho ex2_finite_n(const DeliveryScenario& s, std::size_t nodes = 2048) {
    s.validate();
    if (!s.n) throw std::domain_error("ex2_finite_n: scenario must carry n");
    if (s.noise == 0.0) {
        // degenerate delivery: single deterministic stimulus
        const long n = *s.n;
        const long c = long(std::ceil(double(n) * s.critical - 1e-9));  // guard binary noise in n*c
        const double q = binomial_lower_cdf(n, c - 1, normal_cdf(s.u + s.bias));
        const double mu = 1.0 - q;
        if (q < kUndefinedRhoEps || q > 1.0 - 1e-15) return {mu, std::nullopt};
        return {mu, 0.0};
    }
    const FiniteNMuRho base = detail::ex2_finite_n_at(s, nodes);
    const FiniteNMuRho fine = detail::ex2_finite_n_at(s, 2 * nodes);
    if (std::fabs(fine.mu - base.mu) > 1e-6)
        throw convergence_error("ex2_finite_n: mu not converged under node doubling");
    if (base.rho && fine.rho && std::fabs(*fine.rho - *base.rho) > 1e-6)
        throw convergence_error("ex2_finite_n: rho not converged under node doubling");
    return fine;
}

}  // namespace repseq
