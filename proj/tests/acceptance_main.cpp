// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "repseq/discrim.hpp"
#include "repseq/hetero.hpp"
#include "repseq/ml4.hpp"
#include "repseq/posterior2d.hpp"
#include "repseq/seqmodels.hpp"

using namespace repseq;

namespace {

int g_failures = 0;

class Criterion {
  public:
    Criterion(int index, std::string name)
        : index_(index), name_(std::move(name)), start_(clock::now()) {}

    void check(bool ok, const std::string& what) {
        if (!ok) issues_.push_back(what);
    }

    void check_close(double got, double want, double tol, const std::string& what) {
        if (!(std::fabs(got - want) <= tol)) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s: got %.6g, want %.6g +/- %.2g",
                          what.c_str(), got, want, tol);
            issues_.push_back(buf);
        }
    }

    void check_runtime(double limit_seconds) {
        const double s = elapsed();
        if (s > limit_seconds) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "runtime %.2fs exceeds %.0fs", s,
                          limit_seconds);
            issues_.push_back(buf);
        }
    }

    void note(const std::string& text) { notes_.push_back(text); }

    ~Criterion() {
        const bool ok = issues_.empty();
        if (!ok) ++g_failures;
        std::printf("%s criterion %d: %s (%.2fs)", ok ? "PASS" : "FAIL", index_,
                    name_.c_str(), elapsed());
        for (const std::string& n : notes_) std::printf(" [%s]", n.c_str());
        if (!ok) {
            std::printf(" --");
            for (const std::string& i : issues_) std::printf(" {%s}", i.c_str());
        }
        std::printf("\n");
        std::fflush(stdout);
    }

  private:
    using clock = std::chrono::steady_clock;
    double elapsed() const {
        return std::chrono::duration<double>(clock::now() - start_).count();
    }

    int index_;
    std::string name_;
    clock::time_point start_;
    std::vector<std::string> issues_;
    std::vector<std::string> notes_;
};

void criterion1() {
    Criterion c(1, "exact-replication HDI contrast at m = 50");
    const double tol = 0.02 + 1e-12;  // one support step
    const HdiInterval hi = sampling_hdi({0.8, 0.0, 50}, 0.95);
    const HdiInterval lo = sampling_hdi({0.2, 0.0, 50}, 0.95);
    c.check_close(hi.lower, 0.70, tol, "high lower");
    c.check_close(hi.upper, 0.90, tol, "high upper");
    c.check_close(lo.lower, 0.10, tol, "low lower");
    c.check_close(lo.upper, 0.30, tol, "low upper");
    c.check(intervals_separated(hi, lo), "intervals separated");
    c.check_runtime(1.0);
}

void criterion2() {
    Criterion c(2, "non-exact HDI contrast at rho = 0.15");
    const double tol = 0.02 + 1e-12;
    const HdiInterval hi = sampling_hdi({0.8, 0.15, 50}, 0.95);
    const HdiInterval lo = sampling_hdi({0.2, 0.15, 50}, 0.95);
    c.check_close(hi.lower, 0.46, tol, "high lower");
    c.check_close(hi.upper, 1.00, tol, "high upper");
    c.check_close(lo.lower, 0.00, tol, "low lower");
    c.check_close(lo.upper, 0.54, tol, "low upper");
    c.check(!intervals_separated(hi, lo), "intervals overlap");
}

void criterion3() {
    Criterion c(3, "effective sample sizes");
    c.check(std::lround(effective_sample_size(100, 0.10)) == 9, "m_e(100, 0.10) -> 9");
    c.check(std::lround(effective_sample_size(100, 0.20)) == 5, "m_e(100, 0.20) -> 5");
    c.check(std::lround(effective_sample_size(274, 0.10)) == 10, "m_e(274, 0.10) -> 10");
    c.check_close(effective_sample_size(17, 0.175), 4.5, 0.05, "m_e(17, 0.175)");
    c.check_close(effective_sample_size(17, 0.373), 2.4, 0.05, "m_e(17, 0.373)");
}

void criterion4() {
    Criterion c(4, "population heterogeneity table");
    struct Cell { double theta, sigma, mu, rho; };
    // published 4 x 4 grid at unit standard error
    const Cell cells[] = {
        {2.5, 0.25, 0.992, 0.004}, {2.0, 0.25, 0.974, 0.009}, {1.0, 0.25, 0.834, 0.027},
        {0.1, 0.25, 0.539, 0.037}, {2.5, 0.50, 0.987, 0.028}, {2.0, 0.50, 0.963, 0.049},
        {1.0, 0.50, 0.814, 0.102}, {0.1, 0.50, 0.536, 0.128}, {2.5, 0.75, 0.977, 0.091},
        {2.0, 0.75, 0.945, 0.130}, {1.0, 0.75, 0.788, 0.204}, {0.1, 0.75, 0.532, 0.234},
        {2.5, 1.50, 0.917, 0.388}, {2.0, 1.50, 0.866, 0.422}, {1.0, 1.50, 0.710, 0.470},
        {0.1, 1.50, 0.522, 0.487},
    };
    for (const Cell& cell : cells) {
        const PopulationScenario s{cell.theta, cell.sigma, 1.0};
        char tag[48];
        std::snprintf(tag, sizeof(tag), "(theta=%.1f, sigma=%.2f)", cell.theta,
                      cell.sigma);
        c.check_close(ex1_mu(s), cell.mu, 0.001, std::string("mu ") + tag);
        c.check_close(ex1_rho(s), cell.rho, 0.002, std::string("rho ") + tag);
    }
    c.check_close(ex1_rho({1.0, 0.50, 0.1}), 0.737, 0.005, "rho at n = 100");
    c.check_runtime(5.0);
}

void criterion5() {
    Criterion c(5, "delivery bias/noise table");
    c.check_close(binomial_tail(100, 59, 0.5), 0.0443, 1e-4, "test size alpha");
    struct Cell { double bias, noise, mu_l, rho_l, mu_f; std::optional<double> rho_f; };
    // published rows: large-n pair then finite-n pair per (bias, noise)
    const Cell cells[] = {
        {+1.5, 0.25, 0.992, 0.004, 1.000, std::nullopt},
        {+1.5, 0.50, 0.987, 0.028, 1.000, 0.414},
        {+1.5, 0.75, 0.977, 0.091, 0.999, 0.697},
        {+1.5, 1.50, 0.917, 0.388, 0.936, 0.901},
        {+1.0, 0.25, 0.974, 0.009, 1.000, std::nullopt},
        {+1.0, 0.50, 0.963, 0.049, 1.000, 0.513},
        {+1.0, 0.75, 0.945, 0.130, 0.991, 0.749},
        {+1.0, 1.50, 0.866, 0.422, 0.882, 0.910},
        {+0.5, 0.25, 0.927, 0.018, 1.000, 0.106},
        {+0.5, 0.50, 0.910, 0.076, 0.994, 0.618},
        {+0.5, 0.75, 0.885, 0.170, 0.955, 0.795},
        {+0.5, 1.50, 0.797, 0.449, 0.803, 0.917},
        {+0.0, 0.25, 0.834, 0.027, 0.997, 0.296},
        {+0.0, 0.50, 0.814, 0.102, 0.936, 0.713},
        {+0.0, 0.75, 0.788, 0.204, 0.849, 0.829},
        {+0.0, 1.50, 0.710, 0.470, 0.699, 0.922},
        {-0.5, 0.25, 0.686, 0.035, 0.846, 0.537},
        {-0.5, 0.50, 0.673, 0.121, 0.710, 0.770},
        {-0.5, 0.75, 0.655, 0.226, 0.646, 0.848},
        {-0.5, 1.50, 0.609, 0.483, 0.575, 0.924},
        {-1.0, 0.25, 0.500, 0.037, 0.222, 0.560},
        {-1.0, 0.50, 0.500, 0.128, 0.339, 0.774},
        {-1.0, 0.75, 0.500, 0.234, 0.389, 0.849},
        {-1.0, 1.50, 0.500, 0.487, 0.443, 0.924},
        {-1.5, 0.25, 0.314, 0.035, 0.005, 0.335},
        {-1.5, 0.50, 0.327, 0.121, 0.083, 0.724},
        {-1.5, 0.75, 0.345, 0.226, 0.174, 0.833},
        {-1.5, 1.50, 0.391, 0.483, 0.318, 0.922},
    };
    for (const Cell& cell : cells) {
        char tag[48];
        std::snprintf(tag, sizeof(tag), "(b=%+.1f, s=%.2f)", cell.bias, cell.noise);
        const DeliveryScenario largen{1.0, cell.bias, cell.noise, std::nullopt, 0.59,
                                      0.044};
        c.check_close(ex2_mu_largen(largen), cell.mu_l, 0.001,
                      std::string("large-n mu ") + tag);
        c.check_close(ex2_rho_largen(largen), cell.rho_l, 0.002,
                      std::string("large-n rho ") + tag);
        DeliveryScenario fin = largen;
        fin.n = 100;
        const FiniteNMuRho r = ex2_finite_n(fin);
        c.check_close(r.mu, cell.mu_f, 0.005, std::string("finite-n mu ") + tag);
        if (cell.rho_f) {
            c.check(r.rho.has_value(), std::string("rho defined ") + tag);
            if (r.rho)
                c.check_close(*r.rho, *cell.rho_f, 0.01,
                              std::string("finite-n rho ") + tag);
        } else {
            c.check(!r.rho.has_value(), std::string("rho flagged undefined ") + tag);
        }
    }
    c.check_runtime(30.0);
}

void criterion6() {
    Criterion c(6, "posterior overlap minima at m = 100");
    const std::vector<double> mu_nodes = symmetric_unit_grid(201);
    const std::vector<double> rho_nodes = symmetric_unit_grid(199);
    std::vector<double> targets;
    for (double mu = 0.01; mu < 0.90; mu += 0.11) targets.push_back(mu);
    targets.push_back(0.99);
    const std::size_t nv = targets.size();

    const auto matrix_min = [&](const PriorSpec& prior, std::size_t& arg_i,
                                std::size_t& arg_j) {
        const std::vector<double> mat =
            overlap_matrix(targets, 100, prior, mu_nodes, rho_nodes);
        double mn = 1.0;
        for (std::size_t i = 0; i < nv; ++i)
            for (std::size_t j = i + 1; j < nv; ++j)
                if (mat[i * nv + j] < mn) {
                    mn = mat[i * nv + j];
                    arg_i = i;
                    arg_j = j;
                }
        return mn;
    };
    std::size_t ui, uj, ji, jj;
    const double min_uniform = matrix_min(PriorSpec::uniform(), ui, uj);
    const double min_jeffreys = matrix_min(PriorSpec::jeffreys(), ji, jj);
    c.check_close(min_uniform, 0.36, 0.02, "uniform-prior minimum");
    c.check(ui == 0 && uj == nv - 1, "uniform minimum at the (0.01, 0.99) pair");
    c.check_close(min_jeffreys, 0.07, 0.02, "Jeffreys-prior minimum");
    c.check(min_jeffreys < min_uniform, "Jeffreys sharper than uniform");
    c.check_runtime(300.0);
}

void criterion7() {
    Criterion c(7, "ML4 sensitivity quantities at rho = 0.175 / 0.373");
    const double tol17 = 1.0 / 17.0 + 1e-12;

    const HdiInterval amber = sampling_hdi({0.565, 0.175, 17}, 0.95);
    c.check_close(amber.lower, 0.12, tol17, "amber band lower");
    c.check_close(amber.upper, 0.94, tol17, "amber band upper");

    const auto pair = minimal_separable_pair(17, 0.175, 0.95, 1e-3);
    c.check(pair.has_value(), "separable pair exists at rho = 0.175");
    if (pair) {
        c.check_close(pair->mu_high, 0.852, 2e-3, "pair mu_high");
        c.check_close(pair->mu_low, 0.148, 2e-3, "pair mu_low");
        const HdiInterval hi = sampling_hdi({pair->mu_high, 0.175, 17}, 0.95);
        const HdiInterval lo = sampling_hdi({pair->mu_low, 0.175, 17}, 0.95);
        c.check_close(hi.lower, 0.529, tol17, "high band lower");
        c.check_close(hi.upper, 1.000, tol17, "high band upper");
        c.check_close(lo.lower, 0.000, tol17, "low band lower");
        c.check_close(lo.upper, 0.471, tol17, "low band upper");
        c.check_close(pair->gap, 0.059, tol17, "separation gap");
    }

    // at the posterior-mean heterogeneity the published pair never separates
    for (long m : {17L, 1000L, 10000L}) {
        const HdiInterval hi = sampling_hdi({0.852, 0.373, m}, 0.95);
        const HdiInterval lo = sampling_hdi({0.148, 0.373, m}, 0.95);
        c.check(!intervals_separated(hi, lo),
                "pair (0.148, 0.852) not separable at m = " + std::to_string(m));
    }
    // the asymptotic 0.85 width figure is the variance-floor normal
    // approximation; the exact discrete HDI converges to the narrower
    // mixing-distribution width (reported, see notes)
    const double floor_width =
        2.0 * normal_quantile(0.975) * std::sqrt(0.852 * 0.148 * 0.373);
    c.check_close(floor_width, 0.85, 0.02, "floor-approximation width");
    const double exact_width = sampling_hdi({0.852, 0.373, 10000}, 0.95).width();
    char note[96];
    std::snprintf(note, sizeof(note), "exact HDI width at m=1e4: %.4f", exact_width);
    c.note(note);
    c.check(exact_width > 0.5, "width converges to a positive limit");
}

void criterion8() {
    Criterion c(8, "conjugate layer from the published sufficient statistics");
    const SufficientStats stats = SufficientStats::from_mean_sd(17, 0.055, 0.250);
    const NigPosterior post = nig_update(stats, NigHyper::jeffreys());
    c.check_close(post.kappa_n, 17.0, 1e-12, "kappa_n");
    c.check_close(post.mu_n, 0.055, 1e-12, "mu_n");
    c.check_close(post.alpha_n, 8.5, 1e-12, "alpha_n");
    c.check_close(post.beta_n, 0.5, 1e-12, "beta_n");

    const std::size_t S = 300000;
    const std::vector<ThetaSigma2> draws = nig_sample(post, S, 0xacce9701ULL);
    std::vector<double> theta(S);
    for (std::size_t i = 0; i < S; ++i) theta[i] = draws[i].theta;
    std::sort(theta.begin(), theta.end());
    const double nu = 2.0 * post.alpha_n;
    const double scale = std::sqrt(post.beta_n / (post.alpha_n * post.kappa_n));
    // analytic Student-t CDF via the incomplete beta continued fraction
    const auto inc_beta = [](double a, double b, double x) {
        const auto frac = [](double a, double b, double x) {
            constexpr double tiny = 1e-300;
            double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
            if (std::fabs(d) < tiny) d = tiny;
            d = 1.0 / d;
            double h = d;
            for (int m = 1; m <= 400; ++m) {
                const double m2 = 2.0 * m;
                double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
                d = 1.0 + num * d;
                if (std::fabs(d) < tiny) d = tiny;
                c = 1.0 + num / c;
                if (std::fabs(c) < tiny) c = tiny;
                d = 1.0 / d;
                h *= d * c;
                num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
                d = 1.0 + num * d;
                if (std::fabs(d) < tiny) d = tiny;
                c = 1.0 + num / c;
                if (std::fabs(c) < tiny) c = tiny;
                d = 1.0 / d;
                const double del = d * c;
                h *= del;
                if (std::fabs(del - 1.0) < 1e-16) break;
            }
            return h;
        };
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 1.0;
        const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
        if (x < (a + 1.0) / (a + b + 2.0))
            return std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta) / a *
                   frac(a, b, x);
        return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - lbeta) / b *
                         frac(b, a, 1.0 - x);
    };
    const auto t_cdf = [&](double t) {
        const double x = nu / (nu + t * t);
        const double tail = 0.5 * inc_beta(nu / 2.0, 0.5, x);
        return t > 0.0 ? 1.0 - tail : tail;
    };
    double dist = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
        const double f = t_cdf((theta[i] - post.mu_n) / scale);
        dist = std::max(dist, std::fabs(f - double(i) / double(S)));
        dist = std::max(dist, std::fabs(double(i + 1) / double(S) - f));
    }
    c.check(dist < 0.005, "Student-t distributional distance " + std::to_string(dist));
}

void criterion9() {
    Criterion c(9, "effect-size pipeline property suite");
    c.note("site-level targets conditional on real data ingestion; bundled sites are synthetic");
    const std::string path = std::string(REPSEQ_DATA_DIR) + "/ml4_sites_example.csv";
    const std::vector<EffectSizeRecord> records = read_effect_sizes_csv(path);
    std::vector<double> g17, se17, g18, se18;
    for (const EffectSizeRecord& r : records) {
        const double s = se_hedges(r);
        g18.push_back(r.g);
        se18.push_back(s);
        if (r.protocol != Protocol::REFERENCE) {
            g17.push_back(r.g);
            se17.push_back(s);
        }
    }
    const std::size_t S = 300000;
    for (const auto& [label, hyper] :
         {std::pair<std::string, NigHyper>{"jeffreys", NigHyper::jeffreys()},
          std::pair<std::string, NigHyper>{"weak", NigHyper::weakly_informative()}}) {
        const MuRhoDraws base = propagate_mu_rho(
            nig_sample(nig_update(SufficientStats::from_values(g17), hyper), S, 31),
            se17, 32);
        const MuRhoDraws withref = propagate_mu_rho(
            nig_sample(nig_update(SufficientStats::from_values(g18), hyper), S, 31),
            se18, 32);
        detail::CompensatedSum rb, rr;
        for (double v : base.rho_values()) rb.add(v);
        for (double v : withref.rho_values()) rr.add(v);
        const double mean_base = rb.value() / double(base.rho_values().size());
        const double mean_ref = rr.value() / double(withref.rho_values().size());
        c.check(mean_ref > mean_base, "reference raises mean rho (" + label + ")");
        c.check(double(base.clamped_count) / double(S) < 0.001,
                "clamped fraction < 0.1% (" + label + ")");
        c.check(double(withref.clamped_count) / double(S) < 0.001,
                "clamped fraction with reference < 0.1% (" + label + ")");
    }
    // identical groups: exceedance 1/2
    const NigPosterior post =
        nig_update(SufficientStats::from_values(g17), NigHyper::jeffreys());
    const std::vector<ThetaSigma2> ts = nig_sample(post, 100000, 33);
    const MuRhoDraws a = propagate_mu_rho(ts, se17, 34);
    const ContrastResult same = group_contrast(a, a);
    c.check(std::fabs(same.exceedance - 0.5) <= 0.005,
            "identical-group exceedance 0.5 +/- 0.005");
    c.check(same.mean_diff == 0.0, "identical-group mean difference 0");
}

void criterion10() {
    Criterion c(10, "model property suite");

    // beta-binomial PMF against the two-stage generative process, 1e6 draws
    {
        const double mu = 0.565, rho = 0.175;
        const long m = 17, draws = 1000000;
        const BetaShape sh = beta_shape_from_mean_icc(mu, rho);
        std::mt19937_64 gen(0xacce9702ULL);
        std::gamma_distribution<double> ga(sh.a, 1.0), gb(sh.b, 1.0);
        std::vector<long> counts(std::size_t(m) + 1, 0);
        for (long s = 0; s < draws; ++s) {
            const double u = ga(gen);
            const double phi = u / (u + gb(gen));
            std::binomial_distribution<long> bin(m, phi);
            ++counts[std::size_t(bin(gen))];
        }
        bool ok = true;
        for (long x = 0; x <= m; ++x) {
            const double p = betabinomial_pmf({mu, rho, m}, x);
            const double se = std::sqrt(p * (1.0 - p) / double(draws));
            if (std::fabs(double(counts[std::size_t(x)]) / double(draws) - p) >
                4.0 * se + 1e-9)
                ok = false;
        }
        c.check(ok, "PMF within 4 SE of two-stage Monte Carlo");
    }

    // operational variance limits, exact to 1e-12
    for (double rho : {0.0, 0.3, 0.9}) {
        OperationalDesign ones{std::vector<long>(20, 1)};
        c.check_close(operational_variance(0.5, rho, ones), 0.25 / 20.0, 1e-12,
                      "k = 1 variance is rho-free");
    }
    {
        // residual binomial term is mu(1-mu)(1-rho)/(m k) ~ 9e-16 here
        OperationalDesign huge{std::vector<long>(20, 10000000000000L)};
        c.check_close(operational_variance(0.5, 0.3, huge), 0.25 * 0.3 / 20.0, 1e-12,
                      "k -> infinity variance reaches the floor over m");
    }

    // excess variance identity to 1e-12
    for (double rho : {0.0, 0.25, 0.8}) {
        for (long k : {1L, 3L, 50L}) {
            const long m = 11;
            OperationalDesign unif{std::vector<long>(std::size_t(m), k)};
            const double lhs = excess_variance(0.35, rho, k, m);
            const double rhs =
                operational_variance(0.35, rho, unif) - 0.35 * 0.65 * rho / double(m);
            c.check(std::fabs(lhs - rhs) <= 1e-12, "excess variance identity");
        }
    }

    // two-point mixture floor equals delta^2 exactly
    for (double delta : {0.05, 0.1, 0.3}) {
        const TwoPointMixture mix{0.5, delta};
        c.check(variance_floor(mix.mu, two_point_icc(mix)) == delta * delta,
                "two-point floor is delta^2");
    }

    // Jeffreys prior symmetry (exact) and concentration near rho = 0
    {
        const std::vector<double> mu = symmetric_unit_grid(41);
        const std::vector<double> rho = symmetric_unit_grid(41);
        const std::vector<double> prior = jeffreys_prior_grid(40, mu, rho);
        bool sym = true;
        double low = 0.0, high = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i)
            for (std::size_t j = 0; j < rho.size(); ++j) {
                if (prior[i * rho.size() + j] !=
                    prior[(mu.size() - 1 - i) * rho.size() + j])
                    sym = false;
                if (rho[j] < 0.1) low += prior[i * rho.size() + j];
                if (rho[j] > 0.9) high += prior[i * rho.size() + j];
            }
        c.check(sym, "Jeffreys prior exactly symmetric in mu");
        c.check(low > high, "Jeffreys prior concentrates near rho = 0");
    }

    // identifiability collapse at k = 1: the verdict law is exactly rho-free
    {
        bool ok = true;
        for (double rho : {0.01, 0.5, 0.99})
            if (std::fabs(betabinomial_pmf({0.41, rho, 1}, 1) - 0.41) > 1e-12) ok = false;
        c.check(ok, "one-verdict marginal is exactly Bernoulli(mu)");
    }
}

}  // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
