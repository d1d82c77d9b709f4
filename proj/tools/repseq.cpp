// Command-line surface of the replication-sequence toolkit. Every
// subcommand writes one machine-readable table (CSV or JSON) whose header
// records the tool version, full command line, seed, and the numerical
// decisions that shape the payload. Exit codes: 0 success, 2 validation,
// 3 I/O, 4 numerical non-convergence.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repseq/discrim.hpp"
#include "repseq/hetero.hpp"
#include "repseq/io.hpp"
#include "repseq/ml4.hpp"
#include "repseq/posterior2d.hpp"
#include "repseq/seqmodels.hpp"

namespace {

using namespace repseq;

constexpr const char* kHdiTieRule = "shortest-contiguous;ties:higher-mass,lower-start";
constexpr const char* kMuGridReading = "0.01:step0.11:0.89,clamp0.99";

struct CommonOpts {
    std::string out;
    std::string format = "csv";
    std::uint64_t seed = 20260809;
    double level = 0.95;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_level = true) {
    cmd->add_option("--out", opts.out, "output file path")->required();
    cmd->add_option("--format", opts.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", opts.seed, "RNG seed recorded in the output header");
    if (with_level)
        cmd->add_option("--level", opts.level, "probability level for intervals")
            ->check(CLI::Range(1e-6, 1.0 - 1e-6));
}

std::string joined_cmdline(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

void stamp(OutputTable& t, const std::string& cmdline, const CommonOpts& opts) {
    t.meta("tool", "repseq");
    t.meta("version", kVersion);
    t.meta("command", cmdline);
    t.meta("seed", std::to_string(opts.seed));
}

PriorSpec parse_prior(const std::string& s) {
    if (s == "uniform") return PriorSpec::uniform();
    if (s == "jeffreys") return PriorSpec::jeffreys();
    if (s.rfind("fixed:", 0) == 0) return PriorSpec::fixed(std::stod(s.substr(6)));
    throw std::invalid_argument("prior must be uniform, jeffreys, or fixed:<rho>");
}

std::vector<double> linspace01(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * double(i) / double(n - 1);
    return v;
}

// ---- figure1: HDI grid behind the sensitivity panels ----------------------

struct Figure1Opts {
    CommonOpts common;
    std::vector<double> rho_list{0.0, 0.05, 0.10, 0.15, 0.20, 0.25};
    std::vector<long> m_list{5, 50, 500};
    std::size_t mu_steps = 99;
    std::vector<double> mu_list;  // explicit band positions, overrides the grid
};

void run_figure1(const Figure1Opts& o, const std::string& cmdline) {
    if (o.m_list.empty()) throw std::invalid_argument("figure1: m list must be non-empty");
    if (o.rho_list.empty())
        throw std::invalid_argument("figure1: rho list must be non-empty");
    const std::vector<double> mu_grid =
        o.mu_list.empty() ? linspace01(o.mu_steps, 0.01, 0.99) : o.mu_list;
    OutputTable t({"mu", "rho", "m", "level", "lower", "upper", "attained_mass"});
    stamp(t, cmdline, o.common);
    t.meta("hdi_tie_rule", kHdiTieRule);
    for (double rho : o.rho_list) {
        for (const HdiGridCell& c : hdi_grid(mu_grid, rho, o.m_list, o.common.level))
            t.add_row({c.mu, c.rho, c.m, c.hdi.level, c.hdi.lower, c.hdi.upper,
                       c.hdi.attained_mass});
    }
    t.write_file(o.common.out, o.common.format);
}

// ---- effective-size --------------------------------------------------------

struct EffSizeOpts {
    CommonOpts common;
    std::vector<double> rho_list{0.0, 0.05, 0.10, 0.15, 0.20, 0.25};
    std::vector<long> m_list;  // default 1..500 set below
};

void run_effective_size(const EffSizeOpts& o, const std::string& cmdline) {
    std::vector<long> ms = o.m_list;
    if (ms.empty())
        for (long m = 1; m <= 500; ++m) ms.push_back(m);
    // m_e itself stays unrounded; the display column carries the integer
    OutputTable t({"m", "rho", "m_e", "m_e_rounded", "asymptote"});
    stamp(t, cmdline, o.common);
    for (double rho : o.rho_list) {
        for (long m : ms) {
            Cell asym = rho > 0.0 ? Cell{1.0 / rho} : Cell{std::monostate{}};
            const double me = effective_sample_size(m, rho);
            t.add_row({m, rho, me, std::lround(me), asym});
        }
    }
    t.write_file(o.common.out, o.common.format);
}

// ---- overlap: pairwise posterior overlap heatmap ---------------------------

struct OverlapOpts {
    CommonOpts common;
    std::string prior = "uniform";
    long m = 100;
    std::vector<double> mu_list;  // default: the published heatmap grid
    std::size_t grid_mu = 201;
    std::size_t grid_rho = 199;
};

std::vector<double> default_heatmap_mu_list() {
    std::vector<double> v;
    for (double mu = 0.01; mu < 0.90; mu += 0.11) v.push_back(mu);
    v.push_back(0.99);
    return v;
}

void run_overlap(const OverlapOpts& o, const std::string& cmdline) {
    const PriorSpec prior = parse_prior(o.prior);
    std::vector<double> mu_list = o.mu_list.empty() ? default_heatmap_mu_list() : o.mu_list;
    const std::vector<double> mu_nodes = symmetric_unit_grid(o.grid_mu);
    const std::vector<double> rho_nodes = symmetric_unit_grid(o.grid_rho);
    const std::vector<double> mat =
        overlap_matrix(mu_list, o.m, prior, mu_nodes, rho_nodes);
    OutputTable t({"mu_i", "mu_j", "overlap"});
    stamp(t, cmdline, o.common);
    t.meta("prior", o.prior);
    t.meta("m", std::to_string(o.m));
    t.meta("mu_grid_reading", kMuGridReading);
    t.meta("grid", std::to_string(o.grid_mu) + "x" + std::to_string(o.grid_rho));
    t.meta("jeffreys_fd_step", "1e-4");
    for (std::size_t i = 0; i < mu_list.size(); ++i)
        for (std::size_t j = 0; j < mu_list.size(); ++j)
            t.add_row({mu_list[i], mu_list[j], mat[i * mu_list.size() + j]});
    t.write_file(o.common.out, o.common.format);
}

// ---- conditional: posteriors of mu at fixed rho ----------------------------

struct ConditionalOpts {
    CommonOpts common;
    std::vector<double> rho_list{0.05, 0.15, 0.25};
    std::vector<double> mu_true_list{0.2, 0.4, 0.6, 0.8};
    long m = 100;
    std::size_t grid_mu = 201;
};

void run_conditional(const ConditionalOpts& o, const std::string& cmdline) {
    const std::vector<double> mu_nodes = symmetric_unit_grid(o.grid_mu);
    OutputTable t({"rho", "mu_true", "x", "mu", "mass", "density"});
    stamp(t, cmdline, o.common);
    t.meta("grid_mu", std::to_string(o.grid_mu));
    const double step = mu_nodes[1] - mu_nodes[0];
    for (double rho : o.rho_list) {
        for (double mu_true : o.mu_true_list) {
            const long x = std::lround(double(o.m) * mu_true);
            const PosteriorGrid2D post =
                joint_posterior(x, o.m, PriorSpec::fixed(rho), mu_nodes, {});
            const std::vector<double> marg = marginal_mu(post);
            for (std::size_t i = 0; i < mu_nodes.size(); ++i)
                t.add_row({rho, mu_true, x, mu_nodes[i], marg[i], marg[i] / step});
        }
    }
    t.write_file(o.common.out, o.common.format);
}

// ---- example1 / example2: generative heterogeneity tables ------------------

struct Example1Opts {
    CommonOpts common;
    std::vector<double> theta_list{2.5, 2.0, 1.0, 0.1};
    std::vector<double> sigma_list{0.25, 0.50, 0.75, 1.50};
    double se = 1.0;
};

void run_example1(const Example1Opts& o, const std::string& cmdline) {
    OutputTable t({"theta", "sigma", "se", "mu", "rho", "panel"});
    stamp(t, cmdline, o.common);
    for (const Ex1Cell& c : ex1_table(o.theta_list, o.sigma_list, o.se))
        t.add_row({c.theta, c.sigma, o.se, c.mu, c.rho, c.panel});
    t.write_file(o.common.out, o.common.format);
}

struct Example2Opts {
    CommonOpts common;
    double u = 1.0;
    std::vector<double> bias_list{1.5, 1.0, 0.5, 0.0, -0.5, -1.0, -1.5};
    std::vector<double> noise_list{0.25, 0.50, 0.75, 1.50};
    long n = 100;
    double critical = 0.59;
    std::size_t nodes = 2048;
};

void run_example2(const Example2Opts& o, const std::string& cmdline) {
    OutputTable t({"u", "bias", "noise", "mode", "n", "mu", "rho", "panel"});
    stamp(t, cmdline, o.common);
    t.meta("gh_nodes", std::to_string(o.nodes));
    t.meta("undefined_rho_eps", fmt17(kUndefinedRhoEps));
    t.meta("critical", fmt17(o.critical));
    for (double bias : o.bias_list) {
        for (double noise : o.noise_list) {
            const DeliveryScenario large{o.u, bias, noise, std::nullopt, o.critical, 0.0};
            const double mu_l = ex2_mu_largen(large);
            const double rho_l = ex2_rho_largen(large);
            t.add_row({o.u, bias, noise, std::string("large_n"), std::monostate{}, mu_l,
                       rho_l, panel_label(rho_l)});
            DeliveryScenario fin = large;
            fin.n = o.n;
            const FiniteNMuRho r = ex2_finite_n(fin, o.nodes);
            Cell rho_cell = r.rho ? Cell{*r.rho} : Cell{std::monostate{}};
            Cell panel_cell =
                r.rho ? Cell{panel_label(*r.rho)} : Cell{std::string("---")};
            t.add_row({o.u, bias, noise, std::string("finite_n"), o.n, r.mu, rho_cell,
                       panel_cell});
        }
    }
    t.write_file(o.common.out, o.common.format);
}

// ---- ml4: effect-size reanalysis pipeline ----------------------------------

struct Ml4Opts {
    CommonOpts common;
    std::string input;
    std::string prior;  // empty = both
    std::string groups = "all";
    std::size_t draws = 300000;
    std::string map = "simulate";
};

struct GroupData {
    std::string name;
    std::vector<double> g;
    std::vector<double> se;

    SufficientStats stats() const { return SufficientStats::from_values(g); }
};

std::vector<GroupData> select_groups(const std::vector<EffectSizeRecord>& records,
                                     const std::string& groups) {
    std::vector<double> g_aa, g_ih, se_aa, se_ih;
    std::optional<double> g_ref, se_ref;
    for (const EffectSizeRecord& r : records) {
        const double se = se_hedges(r);
        switch (r.protocol) {
            case Protocol::AA: g_aa.push_back(r.g); se_aa.push_back(se); break;
            case Protocol::IH: g_ih.push_back(r.g); se_ih.push_back(se); break;
            case Protocol::REFERENCE:
                if (g_ref) throw std::invalid_argument("ml4: multiple REFERENCE rows");
                g_ref = r.g;
                se_ref = se;
                break;
        }
    }
    auto cat = [](std::vector<double> a, const std::vector<double>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    std::map<std::string, GroupData> all;
    all["ml4"] = {"ml4", cat(g_aa, g_ih), cat(se_aa, se_ih)};
    all["aa"] = {"aa", g_aa, se_aa};
    all["ih"] = {"ih", g_ih, se_ih};
    if (g_ref) {
        auto with_ref = [&](GroupData d, const std::string& name) {
            d.name = name;
            d.g.push_back(*g_ref);
            d.se.push_back(*se_ref);
            return d;
        };
        all["ml4+ref"] = with_ref(all["ml4"], "ml4+ref");
        all["aa+ref"] = with_ref(all["aa"], "aa+ref");
        all["ih+ref"] = with_ref(all["ih"], "ih+ref");
    }
    std::vector<GroupData> out;
    if (groups == "all") {
        // emit every group with enough records for a proper posterior
        for (const char* n : {"ml4", "ml4+ref", "aa", "ih", "aa+ref", "ih+ref"})
            if (all.count(n) && all[n].g.size() >= 2) out.push_back(all[n]);
    } else {
        if (!all.count(groups))
            throw std::invalid_argument("ml4: unknown or unavailable group: " + groups);
        if (all[groups].g.size() < 2)
            throw std::invalid_argument("ml4: group '" + groups +
                                        "' has fewer than 2 records");
        out.push_back(all[groups]);
    }
    return out;
}

void run_ml4(const Ml4Opts& o, const std::string& cmdline) {
    // detect input kind from the header line
    bool site_level;
    {
        std::ifstream probe(o.input);
        if (!probe) throw std::runtime_error("cannot open input file: " + o.input);
        std::string line;
        while (std::getline(probe, line) && (line.empty() || line[0] == '#')) {}
        site_level = line.find("site_id") != std::string::npos;
    }
    std::vector<GroupData> groups;
    std::optional<SufficientStats> stats_override;
    if (site_level) {
        groups = select_groups(read_effect_sizes_csv(o.input), o.groups);
    } else {
        if (o.groups != "all" && o.groups != "ml4")
            throw std::invalid_argument(
                "ml4: sufficient-statistics input supports only --groups ml4");
        stats_override = read_sufficient_stats_csv(o.input);
        // large-n mapping: no site detail, unit standard errors
        groups.push_back(
            {"ml4", {}, std::vector<double>(std::size_t(stats_override->m), 1.0)});
    }

    std::vector<std::string> priors;
    if (o.prior.empty())
        priors = {"jeffreys", "weak"};
    else if (o.prior == "jeffreys" || o.prior == "weak")
        priors = {o.prior};
    else
        throw std::invalid_argument("ml4: prior must be jeffreys or weak");

    OutputTable t({"group", "prior", "m", "mu_mean", "mu_hdi_lo", "mu_hdi_hi", "rho_mean",
                   "rho_hdi_lo", "rho_hdi_hi", "panel_range", "S", "seed", "clamped",
                   "degenerate"});
    stamp(t, cmdline, o.common);
    t.meta("input", o.input);
    t.meta("map", o.map);
    t.meta("se_mapping", site_level ? "se_hedges(site)" : "large_n(se=1)");
    t.meta("rho_draw_variance", "sample(m-1)");

    for (const GroupData& grp : groups) {
        const SufficientStats st = stats_override ? *stats_override : grp.stats();
        for (const std::string& pr : priors) {
            const NigHyper hyper =
                pr == "jeffreys" ? NigHyper::jeffreys() : NigHyper::weakly_informative();
            const NigPosterior post = nig_update(st, hyper);
            const std::vector<ThetaSigma2> ts =
                nig_sample(post, o.draws, o.common.seed);
            const MuRhoDraws draws =
                o.map == "analytic" ? propagate_mu_rho_analytic(ts, grp.se)
                                    : propagate_mu_rho(ts, grp.se, o.common.seed);
            detail::CompensatedSum mu_acc;
            for (double v : draws.mu) mu_acc.add(v);
            const double mu_mean = mu_acc.value() / double(draws.size());
            const std::vector<double> rhos = draws.rho_values();
            detail::CompensatedSum rho_acc;
            for (double v : rhos) rho_acc.add(v);
            const double rho_mean = rho_acc.value() / double(rhos.size());
            const HdiInterval mu_hdi = hdi_continuous(draws.mu, o.common.level);
            const HdiInterval rho_hdi = hdi_continuous(rhos, o.common.level);
            const std::string panel_range =
                panel_label(rho_hdi.lower) + ".." + panel_label(rho_hdi.upper);
            t.add_row({grp.name, pr, long(st.m), mu_mean, mu_hdi.lower, mu_hdi.upper,
                       rho_mean, rho_hdi.lower, rho_hdi.upper, panel_range,
                       long(o.draws), long(o.common.seed), long(draws.clamped_count),
                       long(draws.degenerate_count)});
        }
    }
    t.write_file(o.common.out, o.common.format);
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cmdline = joined_cmdline(argc, argv);
    CLI::App app{"replication-sequence statistics toolkit"};
    app.require_subcommand(1);

    Figure1Opts f1;
    CLI::App* c_f1 = app.add_subcommand("figure1", "HDI grid of mu_hat across (mu, rho, m)");
    add_common(c_f1, f1.common);
    c_f1->add_option("--rho", f1.rho_list, "rho values (one panel each)");
    c_f1->add_option("--m", f1.m_list, "replication counts");
    c_f1->add_option("--grid-mu", f1.mu_steps, "number of mu grid points")
        ->check(CLI::Range(std::size_t(2), std::size_t(100000)));
    c_f1->add_option("--mu-list", f1.mu_list, "explicit mu values instead of the grid");

    EffSizeOpts ef;
    CLI::App* c_ef = app.add_subcommand("effective-size",
                                        "effective independent replications m_e");
    add_common(c_ef, ef.common, false);
    c_ef->add_option("--rho", ef.rho_list, "rho values");
    c_ef->add_option("--m", ef.m_list, "replication counts (default 1..500)");

    OverlapOpts ov;
    CLI::App* c_ov = app.add_subcommand("overlap", "pairwise posterior overlap heatmap");
    add_common(c_ov, ov.common, false);
    c_ov->add_option("--prior", ov.prior, "uniform | jeffreys | fixed:<rho>");
    c_ov->add_option("--m", ov.m, "number of replications")->check(CLI::PositiveNumber);
    c_ov->add_option("--mu-list", ov.mu_list, "target mu values (x = round(m mu))");
    c_ov->add_option("--grid-mu", ov.grid_mu, "mu grid resolution (odd)");
    c_ov->add_option("--grid-rho", ov.grid_rho, "rho grid resolution (odd)");

    ConditionalOpts cd;
    CLI::App* c_cd = app.add_subcommand("conditional",
                                        "posteriors of mu at fixed rho, x = m mu_true");
    add_common(c_cd, cd.common, false);
    c_cd->add_option("--rho", cd.rho_list, "fixed rho values");
    c_cd->add_option("--mu-true", cd.mu_true_list, "data-generating mu values");
    c_cd->add_option("--m", cd.m, "number of replications")->check(CLI::PositiveNumber);
    c_cd->add_option("--grid-mu", cd.grid_mu, "mu grid resolution (odd)");

    Example1Opts e1;
    CLI::App* c_e1 = app.add_subcommand("example1",
                                        "population heterogeneity table (mu, rho)");
    add_common(c_e1, e1.common, false);
    c_e1->add_option("--theta", e1.theta_list, "true effect sizes");
    c_e1->add_option("--sigma", e1.sigma_list, "between-experiment SDs");
    c_e1->add_option("--se", e1.se, "within-experiment standard error")
        ->check(CLI::PositiveNumber);

    Example2Opts e2;
    CLI::App* c_e2 = app.add_subcommand("example2",
                                        "stimulus delivery bias/noise table (mu, rho)");
    add_common(c_e2, e2.common, false);
    c_e2->add_option("--u", e2.u, "standardized intended stimulus");
    c_e2->add_option("--bias", e2.bias_list, "delivery bias b/tau values");
    c_e2->add_option("--noise", e2.noise_list, "delivery noise sigma/tau values");
    c_e2->add_option("--n", e2.n, "per-experiment sample size")->check(CLI::PositiveNumber);
    c_e2->add_option("--critical", e2.critical, "finite-n decision threshold")
        ->check(CLI::Range(1e-9, 1.0 - 1e-9));
    c_e2->add_option("--nodes", e2.nodes, "Gauss-Hermite node count");

    Ml4Opts m4;
    CLI::App* c_m4 = app.add_subcommand("ml4", "effect-size reanalysis pipeline");
    add_common(c_m4, m4.common);
    c_m4->add_option("--input", m4.input, "CSV of effect sizes or sufficient statistics")
        ->required();
    c_m4->add_option("--prior", m4.prior, "jeffreys | weak (default: both)");
    c_m4->add_option("--groups", m4.groups,
                     "all | ml4 | ml4+ref | aa | ih | aa+ref | ih+ref");
    c_m4->add_option("--draws", m4.draws, "posterior draw count S")
        ->check(CLI::Range(std::size_t(1000), std::size_t(100000000)));
    c_m4->add_option("--map", m4.map, "simulate (Monte Carlo sites) | analytic")
        ->check(CLI::IsMember({"simulate", "analytic"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: validation: " << e.what() << std::endl;
        return 2;
    }

    try {
        if (c_f1->parsed()) run_figure1(f1, cmdline);
        else if (c_ef->parsed()) run_effective_size(ef, cmdline);
        else if (c_ov->parsed()) run_overlap(ov, cmdline);
        else if (c_cd->parsed()) run_conditional(cd, cmdline);
        else if (c_e1->parsed()) run_example1(e1, cmdline);
        else if (c_e2->parsed()) run_example2(e2, cmdline);
        else if (c_m4->parsed()) run_ml4(m4, cmdline);
    } catch (const convergence_error& e) {
        std::cerr << "error: convergence: " << e.what() << std::endl;
        return 4;
    } catch (const std::domain_error& e) {
        std::cerr << "error: validation: " << e.what() << std::endl;
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: validation: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: io: " << e.what() << std::endl;
        return 3;
    }
    return 0;
}
