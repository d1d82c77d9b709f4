#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

// Deterministic special functions and distribution kernels shared by the
// rest of the library. Everything here is a pure function of its arguments.

namespace repseq {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;

/// Shape parameters of a Beta distribution in the standard (a, b)
/// parameterization. Invariant: a > 0, b > 0.
struct BetaShape {
    double a;
    double b;

    double mean() const { return a / (a + b); }
    double variance() const {
        const double s = a + b;
        return a * b / (s * s * (s + 1.0));
    }
};

/// Converts the (mean, intraclass correlation) parameterization of a Beta
/// distribution to standard shapes: a = mu(1-rho)/rho, b = (1-mu)(1-rho)/rho.
/// Requires mu and rho strictly inside (0, 1).
inline BetaShape beta_shape_from_mean_icc(double mu, double rho) {
    if (!(mu > 0.0 && mu < 1.0))
        throw std::domain_error("beta_shape_from_mean_icc: mu must be in (0,1)");
    if (!(rho > 0.0 && rho < 1.0))
        throw std::domain_error("beta_shape_from_mean_icc: rho must be in (0,1)");
    const double c = (1.0 - rho) / rho;
    return BetaShape{mu * c, (1.0 - mu) * c};
}

inline double normal_pdf(double z) {
    return 0.39894228040143267794 * std::exp(-0.5 * z * z);
}

/// Standard normal CDF via the complementary error function.
inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / kSqrt2);
}

namespace detail {

// Rational approximation for the inverse normal CDF (Acklam's coefficients),
// accurate to ~1e-9 before refinement.
inline double norm_quantile_approx(double p) {
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Neumaier compensated summation.
class CompensatedSum {
  public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::fabs(sum_) >= std::fabs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace detail

/// Inverse standard normal CDF; rational approximation polished with one
/// Newton step against the erfc-based CDF.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("normal_quantile: p must be in (0,1)");
    double x = detail::norm_quantile_approx(p);
    const double e = normal_cdf(x) - p;
    x -= e / normal_pdf(x);
    return x;
}

/// Standard bivariate normal CDF P(X <= h, Y <= k) with correlation r.
///
/// Gauss-Legendre quadrature over the correlation parameter in the style of
/// Drezner & Wesolowsky, with the high-|r| transformation of Genz (2004).
/// Absolute accuracy is well below 1e-12 across the domain.
inline double bivariate_normal_cdf(double h, double k, double r) {
    if (!(std::fabs(r) <= 1.0))
        throw std::domain_error("bivariate_normal_cdf: |r| must be <= 1");
    if (r == 1.0) return normal_cdf(std::min(h, k));
    if (r == -1.0) return std::max(0.0, normal_cdf(h) + normal_cdf(k) - 1.0);

    static constexpr double x6[3] = {-0.9324695142031521, -0.6612093864662645,
                                     -0.2386191860831969};
    static constexpr double w6[3] = {0.1713244923791704, 0.3607615730481386,
                                     0.4679139345726910};
    static constexpr double x12[6] = {-0.9815606342467192, -0.9041172563704749,
                                      -0.7699026741943047, -0.5873179542866175,
                                      -0.3678314989981802, -0.1252334085114689};
    static constexpr double w12[6] = {0.04717533638651183, 0.1069393259953184,
                                      0.1600783285433462,  0.2031674267230659,
                                      0.2334925365383548,  0.2491470458134028};
    static constexpr double x20[10] = {-0.9931285991850949, -0.9639719272779138,
                                       -0.9122344282513259, -0.8391169718222188,
                                       -0.7463319064601508, -0.6360536807265150,
                                       -0.5108670019508271, -0.3737060887154196,
                                       -0.2277858511416451, -0.07652652113349733};
    static constexpr double w20[10] = {0.01761400713915212, 0.04060142980038694,
                                       0.06267204833410906, 0.08327674157670475,
                                       0.1019301198172404,  0.1181945319615184,
                                       0.1316886384491766,  0.1420961093183821,
                                       0.1491729864726037,  0.1527533871307259};
    const double* xs;
    const double* ws;
    int lg;
    const double ar = std::fabs(r);
    if (ar < 0.3) {
        xs = x6; ws = w6; lg = 3;
    } else if (ar < 0.75) {
        xs = x12; ws = w12; lg = 6;
    } else {
        xs = x20; ws = w20; lg = 10;
    }

    // Work in upper-tail form: bvnu = P(X > dh, Y > dk).
    double dh = -h, dk = -k;
    double hk = dh * dk;
    double bvn = 0.0;
    const double twopi = 2.0 * kPi;

    if (ar < 0.925) {
        const double hs = (dh * dh + dk * dk) / 2.0;
        const double asr = std::asin(r);
        for (int i = 0; i < lg; ++i) {
            for (int is = -1; is <= 1; is += 2) {
                const double sn = std::sin(asr * (is * xs[i] + 1.0) / 2.0);
                bvn += ws[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        bvn = bvn * asr / (2.0 * twopi) + normal_cdf(-dh) * normal_cdf(-dk);
    } else {
        if (r < 0.0) {
            dk = -dk;
            hk = -hk;
        }
        const double as = (1.0 - r) * (1.0 + r);
        double a = std::sqrt(as);
        const double bs = (dh - dk) * (dh - dk);
        const double c = (4.0 - hk) / 8.0;
        const double d = (12.0 - hk) / 16.0;
        double asr = -(bs / as + hk) / 2.0;
        if (asr > -100.0)
            bvn = a * std::exp(asr) *
                  (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
        if (-hk < 100.0) {
            const double b = std::sqrt(bs);
            const double sp = std::sqrt(twopi) * normal_cdf(-b / a);
            bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (int i = 0; i < lg; ++i) {
            for (int is = -1; is <= 1; is += 2) {
                double x2 = a * (is * xs[i] + 1.0);
                x2 = x2 * x2;
                const double rs = std::sqrt(1.0 - x2);
                asr = -(bs / x2 + hk) / 2.0;
                if (asr > -100.0) {
                    const double sp = 1.0 + c * x2 * (1.0 + d * x2);
                    const double ep = std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs;
                    bvn += a * ws[i] * std::exp(asr) * (ep - sp);
                }
            }
        }
        bvn = -bvn / twopi;
        if (r > 0.0) {
            bvn += normal_cdf(-std::max(dh, dk));
        } else {
            bvn = -bvn;
            if (dk > dh) bvn += normal_cdf(dk) - normal_cdf(dh);
        }
    }
    return std::min(1.0, std::max(0.0, bvn));
}

inline double log_choose(long n, long x) {
    return std::lgamma(double(n) + 1.0) - std::lgamma(double(x) + 1.0) -
           std::lgamma(double(n - x) + 1.0);
}

inline double log_beta(double p, double q) {
    return std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q);
}

inline double binomial_log_pmf(long n, long x, double p) {
    if (p <= 0.0) return x == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return x == n ? 0.0 : -std::numeric_limits<double>::infinity();
    return log_choose(n, x) + double(x) * std::log(p) + double(n - x) * std::log1p(-p);
}

namespace detail {

// Sum of exp(terms[i]) with max-subtraction, compensated.
inline double sum_exp(const std::vector<double>& terms) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double t : terms) mx = std::max(mx, t);
    if (!std::isfinite(mx)) return 0.0;
    CompensatedSum s;
    for (double t : terms) s.add(std::exp(t - mx));
    return std::exp(mx) * s.value();
}

}  // namespace detail

/// Upper binomial tail P(X >= c) for X ~ Binomial(n, p), by log-space
/// summation of the PMF terms x = c..n. Absolute error is below 1e-13 for
/// n into the hundreds; at n ~ 1e5 the lgamma rounding in the per-term
/// logs caps accuracy near 1e-10.
inline double binomial_tail(long n, long c, double p) {
    if (c > n || c < 0) throw std::domain_error("binomial_tail: need 0 <= c <= n");
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("binomial_tail: need 0 <= p <= 1");
    if (c == 0) return 1.0;
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;
    std::vector<double> terms;
    terms.reserve(std::size_t(n - c + 1));
    for (long x = c; x <= n; ++x) terms.push_back(binomial_log_pmf(n, x, p));
    return std::min(1.0, detail::sum_exp(terms));
}

/// Lower binomial tail P(X <= c). Summed directly, not as 1 - binomial_tail,
/// so tiny lower-tail masses keep full relative precision.
inline double binomial_lower_cdf(long n, long c, double p) {
    if (c < 0) return 0.0;
    if (c >= n) return 1.0;
    if (!(p >= 0.0 && p <= 1.0))
        throw std::domain_error("binomial_lower_cdf: need 0 <= p <= 1");
    if (p == 0.0) return 1.0;
    if (p == 1.0) return 0.0;
    std::vector<double> terms;
    terms.reserve(std::size_t(c + 1));
    for (long x = 0; x <= c; ++x) terms.push_back(binomial_log_pmf(n, x, p));
    return std::min(1.0, detail::sum_exp(terms));
}

}  // namespace repseq
