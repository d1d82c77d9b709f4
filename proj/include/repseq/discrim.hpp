#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "repseq/seqmodels.hpp"

// Highest-density intervals of the sampling distribution of mu_hat = X/m on
// its discrete support, and the separability diagnostics built on them.

namespace repseq {

/// HDI of an estimator or parameter: target probability level, bounds on the
/// support, and the probability mass actually attained.
struct HdiInterval {
    double level;
    double lower;
    double upper;
    double attained_mass;

    double width() const { return upper - lower; }
};

/// Symmetric pair of mean rates whose sampling HDIs just separate. gap is
/// the distance between the upper bound of the low interval and the lower
/// bound of the high interval.
struct SeparablePair {
    double mu_low;
    double mu_high;
    double gap;
};

/// 95%-style HDI of the sampling distribution of mu_hat under the benchmark
/// model: the shortest contiguous run of support points {x/m} whose total
/// mass reaches the level. Ties between equally short runs are broken by
/// higher attained mass, then lower start index.
inline HdiInterval sampling_hdi(const SequenceParams& params, double level = 0.95) {
    params.validate();
    if (!(level > 0.0 && level < 1.0))
        throw std::domain_error("sampling_hdi: level must be in (0,1)");
    const std::vector<double> p = betabinomial_pmf_table(params);
    const std::size_t n = p.size();
    std::vector<double> pref(n + 1, 0.0);
    {
        detail::CompensatedSum cs;
        for (std::size_t i = 0; i < n; ++i) {
            cs.add(p[i]);
            pref[i + 1] = cs.value();
        }
    }
    constexpr double mass_eps = 1e-12;  // absorbs rounding in the total mass
    std::size_t best_i = 0, best_len = n;
    double best_mass = pref[n];
    bool found = false;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (j < i) j = i;
        while (j < n && pref[j + 1] - pref[i] < level - mass_eps) ++j;
        if (j >= n) break;
        const std::size_t len = j - i;
        const double mass = pref[j + 1] - pref[i];
        bool better = false;
        if (!found || len < best_len) {
            better = true;
        } else if (len == best_len) {
            if (mass > best_mass + mass_eps) better = true;
        }
        if (better) {
            best_i = i;
            best_len = len;
            best_mass = mass;
            found = true;
        }
    }
    const double m = double(params.m);
    return HdiInterval{level, double(best_i) / m, double(best_i + best_len) / m, best_mass};
}

/// One cell of the HDI-versus-mu grid behind the sensitivity panels.
struct HdiGridCell {
    double mu;
    double rho;
    long m;
    HdiInterval hdi;
};

/// HDIs for every (mu, m) combination at a fixed rho, in row-major order
/// (mu outer, m inner).
inline std::vector<HdiGridCell> hdi_grid(std::span<const double> mu_grid, double rho,
                                         std::span<const long> m_list, double level = 0.95) {
    std::vector<HdiGridCell> cells;
    cells.reserve(mu_grid.size() * m_list.size());
    for (double mu : mu_grid)
        for (long m : m_list)
            cells.push_back({mu, rho, m, sampling_hdi({mu, rho, m}, level)});
    return cells;
}

/// True iff the two intervals have no common point.
inline bool intervals_separated(const HdiInterval& a, const HdiInterval& b) {
    return std::max(a.lower, b.lower) > std::min(a.upper, b.upper);
}

/// The most proximate symmetric pair (mu, 1-mu) whose level-HDIs separate at
/// (m, rho), located by bisection over mu in (1/2, 1) down to the given
/// resolution. Returns nullopt when not even the most extreme pair separates.
inline std::optional<SeparablePair> minimal_separable_pair(long m, double rho,
                                                           double level = 0.95,
                                                           double tolerance = 1e-3) {
    if (tolerance <= 0.0)
        throw std::domain_error("minimal_separable_pair: tolerance must be > 0");
    const auto pair_at = [&](double mu_high) {
        const HdiInterval hi = sampling_hdi({mu_high, rho, m}, level);
        const HdiInterval lo = sampling_hdi({1.0 - mu_high, rho, m}, level);
        return std::pair<bool, double>(intervals_separated(hi, lo), hi.lower - lo.upper);
    };
    double lo = 0.5, hi = 1.0 - tolerance / 2.0;
    if (!pair_at(hi).first) return std::nullopt;
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (pair_at(mid).first)
            hi = mid;
        else
            lo = mid;
    }
    const auto [sep, gap] = pair_at(hi);
    (void)sep;
    return SeparablePair{1.0 - hi, hi, gap};
}

}  // namespace repseq
