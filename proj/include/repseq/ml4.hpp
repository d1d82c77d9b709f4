#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "repseq/discrim.hpp"
#include "repseq/specfun.hpp"

// Effect-size reanalysis pipeline: Hedges' g standardization, conjugate
// Normal-Inverse-Gamma posterior on (theta, sigma^2), Monte Carlo
// propagation to (mu, rho) with per-site standard errors, and continuous
// HDI/contrast summaries of the draws.

namespace repseq {

enum class Protocol { AA, IH, REFERENCE };

inline std::string to_string(Protocol p) {
    switch (p) {
        case Protocol::AA: return "AA";
        case Protocol::IH: return "IH";
        case Protocol::REFERENCE: return "REFERENCE";
    }
    return "?";
}

inline Protocol protocol_from_string(const std::string& s) {
    if (s == "AA") return Protocol::AA;
    if (s == "IH") return Protocol::IH;
    if (s == "REFERENCE" || s == "REF") return Protocol::REFERENCE;
    throw std::invalid_argument("unknown protocol label: " + s);
}

/// One experiment's standardized effect: Hedges' g with the two group sizes.
struct EffectSizeRecord {
    std::string site_id;
    double g;
    long n1;
    long n2;
    Protocol protocol;

    void validate() const {
        if (n1 < 2 || n2 < 2)
            throw std::domain_error("EffectSizeRecord: group sizes must be >= 2");
    }
};

/// Sufficient statistics of the auxiliary normal model: count, mean, and
/// centered sum of squares of the effect sizes.
struct SufficientStats {
    long m;
    double mean_g;
    double ss;

    static SufficientStats from_values(std::span<const double> g) {
        if (g.empty()) throw std::domain_error("SufficientStats: empty sample");
        detail::CompensatedSum s;
        for (double v : g) s.add(v);
        const double mean = s.value() / double(g.size());
        detail::CompensatedSum s2;
        for (double v : g) s2.add((v - mean) * (v - mean));
        return {long(g.size()), mean, s2.value()};
    }

    static SufficientStats from_mean_sd(long m, double mean, double sd) {
        if (m < 1) throw std::domain_error("SufficientStats: m must be >= 1");
        if (sd < 0.0) throw std::domain_error("SufficientStats: sd must be >= 0");
        return {m, mean, double(m - 1) * sd * sd};
    }
};

/// Normal-Inverse-Gamma hyperparameters. The all-zero limit is the improper
/// Jeffreys prior; it yields a proper posterior for m >= 2.
struct NigHyper {
    double mu0 = 0.0;
    double kappa0 = 0.0;
    double alpha0 = 0.0;
    double beta0 = 0.0;

    static NigHyper jeffreys() { return {0.0, 0.0, 0.0, 0.0}; }
    static NigHyper weakly_informative() { return {0.0, 1.0, 1.0, 1.0}; }
    bool is_jeffreys() const {
        return kappa0 == 0.0 && alpha0 == 0.0 && beta0 == 0.0;
    }
};

struct NigPosterior {
    double kappa_n;
    double mu_n;
    double alpha_n;
    double beta_n;
};

/// Hedges' small-sample correction: g = J d with J = 1 - 3/(4 nu - 1),
/// nu = n1 + n2 - 2.
inline double hedges_from_cohen(double d, long n1, long n2) {
    const long nu = n1 + n2 - 2;
    if (nu < 1) throw std::domain_error("hedges_from_cohen: need n1 + n2 - 2 >= 1");
    return d * (1.0 - 3.0 / (4.0 * double(nu) - 1.0));
}

/// Standard error of Hedges' g for two independent groups:
/// sqrt((n1+n2)/(n1 n2) + g^2/(2(n1+n2-2))).
inline double se_hedges(const EffectSizeRecord& rec) {
    rec.validate();
    const double n1 = double(rec.n1), n2 = double(rec.n2);
    return std::sqrt((n1 + n2) / (n1 * n2) + rec.g * rec.g / (2.0 * (n1 + n2 - 2.0)));
}

/// Conjugate posterior update. In the Jeffreys limit the posterior is
/// kappa_n = m, mu_n = mean_g, alpha_n = m/2, beta_n = ss/2.
inline NigPosterior nig_update(const SufficientStats& stats, const NigHyper& hyper) {
    if (hyper.is_jeffreys() && stats.m < 2)
        throw std::domain_error("nig_update: Jeffreys posterior improper for m < 2");
    const double m = double(stats.m);
    const double kappa_n = hyper.kappa0 + m;
    const double mu_n = hyper.kappa0 == 0.0
                            ? stats.mean_g
                            : (hyper.kappa0 * hyper.mu0 + m * stats.mean_g) / kappa_n;
    const double alpha_n = hyper.alpha0 + m / 2.0;
    const double dg = stats.mean_g - hyper.mu0;
    const double beta_n =
        hyper.beta0 + stats.ss / 2.0 + hyper.kappa0 * m * dg * dg / (2.0 * kappa_n);
    return {kappa_n, mu_n, alpha_n, beta_n};
}

struct ThetaSigma2 {
    double theta;
    double sigma2;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Direct sampling from the NIG posterior: sigma^2 ~ Inv-Gamma(alpha_n,
/// beta_n) via a gamma reciprocal, then theta | sigma^2 ~ N(mu_n,
/// sigma^2/kappa_n). mt19937_64 throughout; reproducible for a given seed.
inline std::vector<ThetaSigma2> nig_sample(const NigPosterior& post, std::size_t S,
                                           std::uint64_t seed) {
    if (!(post.alpha_n > 0.0 && post.beta_n > 0.0 && post.kappa_n > 0.0))
        throw std::domain_error("nig_sample: posterior parameters must be positive");
    std::mt19937_64 gen(detail::splitmix64(seed));
    std::gamma_distribution<double> gamma(post.alpha_n, 1.0 / post.beta_n);
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    std::vector<ThetaSigma2> draws(S);
    const double inv_sqrt_kappa = 1.0 / std::sqrt(post.kappa_n);
    for (std::size_t s = 0; s < S; ++s) {
        const double sigma2 = 1.0 / gamma(gen);
        const double theta = post.mu_n + std::sqrt(sigma2) * inv_sqrt_kappa * stdnorm(gen);
        draws[s] = {theta, sigma2};
    }
    return draws;
}

/// Draws of (mu, rho) propagated from the effect-size posterior. rho is
/// absent on draws where every site probability degenerated to the same
/// endpoint; clamped_count tracks rho values truncated to 1.
struct MuRhoDraws {
    std::vector<double> mu;
    std::vector<std::optional<double>> rho;
    std::uint64_t seed = 0;
    std::size_t clamped_count = 0;
    std::size_t degenerate_count = 0;

    std::size_t size() const { return mu.size(); }

    std::vector<double> rho_values() const {
        std::vector<double> out;
        out.reserve(rho.size());
        for (const auto& r : rho)
            if (r) out.push_back(*r);
        return out;
    }
};

/// Monte Carlo propagation: per posterior draw, simulate site effects
/// theta_i ~ N(theta, sigma^2), map phi_i = Phi(theta_i / se_i), and record
/// mu = mean(phi), rho = var(phi)/(mu(1-mu)) clamped to [0,1]. var is the
/// (m-1)-denominator sample variance across the m sites.
inline MuRhoDraws propagate_mu_rho(std::span<const ThetaSigma2> draws,
                                   std::span<const double> se_list, std::uint64_t seed) {
    if (se_list.empty())
        throw std::invalid_argument("propagate_mu_rho: se_list must be non-empty");
    for (double se : se_list)
        if (!(se > 0.0)) throw std::domain_error("propagate_mu_rho: every se must be > 0");
    const std::size_t m = se_list.size();
    std::mt19937_64 gen(detail::splitmix64(seed ^ 0x70726f70ULL));
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    MuRhoDraws out;
    out.seed = seed;
    out.mu.resize(draws.size());
    out.rho.resize(draws.size());
    std::vector<double> phi(m);
    for (std::size_t s = 0; s < draws.size(); ++s) {
        const double sigma = std::sqrt(draws[s].sigma2);
        detail::CompensatedSum sum;
        for (std::size_t i = 0; i < m; ++i) {
            const double theta_i = draws[s].theta + sigma * stdnorm(gen);
            phi[i] = normal_cdf(theta_i / se_list[i]);
            sum.add(phi[i]);
        }
        const double mu = sum.value() / double(m);
        out.mu[s] = mu;
        if (!(mu > 0.0 && mu < 1.0) || m < 2) {
            out.rho[s] = std::nullopt;
            ++out.degenerate_count;
            continue;
        }
        detail::CompensatedSum s2;
        for (double p : phi) s2.add((p - mu) * (p - mu));
        const double var = s2.value() / double(m - 1);
        double rho = var / (mu * (1.0 - mu));
        if (rho > 1.0) {
            rho = 1.0;
            ++out.clamped_count;
        }
        out.rho[s] = rho;
    }
    return out;
}

/// Deterministic cross-check of propagate_mu_rho: replaces the simulated
/// m-site average with its analytic expectation under theta_i ~ N(theta,
/// sigma^2). mu = (1/m) sum_i Phi(theta/sqrt(se_i^2+sigma^2)) and E[phi^2]
/// via the bivariate normal CDF, so the draws carry no site-level Monte
/// Carlo noise.
inline MuRhoDraws propagate_mu_rho_analytic(std::span<const ThetaSigma2> draws,
                                            std::span<const double> se_list) {
    if (se_list.empty())
        throw std::invalid_argument("propagate_mu_rho_analytic: se_list must be non-empty");
    const std::size_t m = se_list.size();
    MuRhoDraws out;
    out.mu.resize(draws.size());
    out.rho.resize(draws.size());
    for (std::size_t s = 0; s < draws.size(); ++s) {
        const double sigma2 = draws[s].sigma2;
        detail::CompensatedSum sm, s2;
        for (std::size_t i = 0; i < m; ++i) {
            const double v = se_list[i] * se_list[i] + sigma2;
            const double h = draws[s].theta / std::sqrt(v);
            const double r = sigma2 / v;
            sm.add(normal_cdf(h));
            s2.add(bivariate_normal_cdf(h, h, r));
        }
        const double mu = sm.value() / double(m);
        const double e2 = s2.value() / double(m);
        out.mu[s] = mu;
        if (!(mu > 0.0 && mu < 1.0)) {
            out.rho[s] = std::nullopt;
            ++out.degenerate_count;
            continue;
        }
        double rho = (e2 - mu * mu) / (mu * (1.0 - mu));
        rho = std::max(0.0, rho);
        if (rho > 1.0) {
            rho = 1.0;
            ++out.clamped_count;
        }
        out.rho[s] = rho;
    }
    return out;
}

/// Shortest interval containing ceil(level * S) of the sorted draws.
inline HdiInterval hdi_continuous(std::vector<double> draws, double level = 0.95) {
    if (draws.size() < 1000)
        throw std::invalid_argument("hdi_continuous: need at least 1000 draws");
    if (!(level > 0.0 && level < 1.0))
        throw std::domain_error("hdi_continuous: level must be in (0,1)");
    std::sort(draws.begin(), draws.end());
    const std::size_t S = draws.size();
    std::size_t w = std::size_t(std::ceil(level * double(S)));
    w = std::min(std::max<std::size_t>(w, 1), S);
    std::size_t best = 0;
    double best_width = draws[w - 1] - draws[0];
    for (std::size_t i = 1; i + w <= S; ++i) {
        const double width = draws[i + w - 1] - draws[i];
        if (width < best_width) {
            best_width = width;
            best = i;
        }
    }
    return HdiInterval{level, draws[best], draws[best + w - 1], double(w) / double(S)};
}

struct ContrastResult {
    double mean_diff;       // mean of rho_b - rho_a over paired draws
    HdiInterval diff_hdi;
    double exceedance;      // P(rho_b > rho_a), ties counted half
    std::size_t pairs_used;
};

/// Posterior contrast of rho between two groups, paired by draw index.
/// Draws with an absent rho on either side are dropped (counted).
inline ContrastResult group_contrast(const MuRhoDraws& a, const MuRhoDraws& b,
                                     double level = 0.95) {
    if (a.size() != b.size())
        throw std::invalid_argument("group_contrast: draw counts differ");
    std::vector<double> diff;
    diff.reserve(a.size());
    detail::CompensatedSum mean_acc;
    double above = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) {
        if (!a.rho[s] || !b.rho[s]) continue;
        const double d = *b.rho[s] - *a.rho[s];
        diff.push_back(d);
        mean_acc.add(d);
        if (d > 0.0)
            above += 1.0;
        else if (d == 0.0)
            above += 0.5;
    }
    if (diff.size() < 1000)
        throw std::invalid_argument("group_contrast: too few usable paired draws");
    const std::size_t used = diff.size();
    const double mean = mean_acc.value() / double(used);
    return {mean, hdi_continuous(std::move(diff), level), above / double(used), used};
}

// ---- CSV ingestion -------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace detail

/// Reads site-level effect sizes from CSV with header columns
/// site_id,g,n1,n2,protocol (any order). Lines starting with '#' are
/// metadata comments and are skipped.
inline std::vector<EffectSizeRecord> read_effect_sizes_csv(std::istream& in) {
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        header = detail::split_csv_line(line);
        break;
    }
    if (header.empty()) throw std::invalid_argument("effect size CSV: missing header");
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::invalid_argument("effect size CSV: missing column '" + name + "'");
    };
    const std::size_t c_site = col("site_id"), c_g = col("g"), c_n1 = col("n1"),
                      c_n2 = col("n2"), c_proto = col("protocol");
    std::vector<EffectSizeRecord> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() < header.size())
            throw std::invalid_argument("effect size CSV: short row at line " +
                                        std::to_string(lineno));
        try {
            EffectSizeRecord rec{f[c_site], std::stod(f[c_g]), std::stol(f[c_n1]),
                                 std::stol(f[c_n2]), protocol_from_string(f[c_proto])};
            rec.validate();
            records.push_back(std::move(rec));
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("effect size CSV: bad row at line " +
                                        std::to_string(lineno));
        }
    }
    if (records.empty()) throw std::invalid_argument("effect size CSV: no data rows");
    return records;
}

inline std::vector<EffectSizeRecord> read_effect_sizes_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    return read_effect_sizes_csv(in);
}

/// Reads a sufficient-statistics CSV with header m,mean_g,sd_g (single data
/// row).
inline SufficientStats read_sufficient_stats_csv(std::istream& in) {
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        header = detail::split_csv_line(line);
        break;
    }
    if (header.empty()) throw std::invalid_argument("stats CSV: missing header");
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::invalid_argument("stats CSV: missing column '" + name + "'");
    };
    const std::size_t c_m = col("m"), c_mean = col("mean_g"), c_sd = col("sd_g");
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() < header.size()) throw std::invalid_argument("stats CSV: short row");
        return SufficientStats::from_mean_sd(std::stol(f[c_m]), std::stod(f[c_mean]),
                                             std::stod(f[c_sd]));
    }
    throw std::invalid_argument("stats CSV: no data row");
}

inline SufficientStats read_sufficient_stats_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    return read_sufficient_stats_csv(in);
}

}  // namespace repseq
