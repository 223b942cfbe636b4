/**
 * @file quantiles.cpp
 * @brief Implementation of discrete quantiles, chi-square quantiles and
 *        closed-form quantile bounds.
 */

#include "pcd/quantiles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pcd/errors.hpp"

namespace pcd {

namespace {

constexpr double kTailCutoff = 1e-15;
constexpr double kMaxPoissonMean = 1e9;
constexpr double kGammaRelTol = 1e-10;

void require_probability(double u, const char * name) {
    if (!(u > 0.0) || !(u < 1.0)) {
        throw InvalidParameterError(std::string(name) +
                                    " must lie strictly in (0, 1), got " +
                                    std::to_string(u));
    }
}

/**
 * Scans a discrete pmf from k = 0 upward until the CDF reaches u.  The
 * caller supplies log pmf(0) and a step functor giving the pmf ratio
 * pmf(k+1)/pmf(k); the scan stays in log space until the pmf becomes
 * representable, which makes very small pmf(0) safe.
 *
 * `k_end` bounds the scan: at k_end the upper tail is provably below the
 * 1e-15 cutoff, so if u has not been reached the last scanned value is
 * returned (the largest quantile distinguishable at that cutoff).
 */
template <typename RatioFn>
DiscreteQuantile scan_quantile(double log_pmf0, RatioFn ratio,
                               std::uint64_t k_end, double u) {
    double log_pmf = log_pmf0;
    double pmf = std::exp(log_pmf);
    bool in_log_space = (log_pmf < -700.0);
    double cdf = 0.0;
    std::uint64_t k = 0;
    while (true) {
        const double mass = in_log_space ? 0.0 : pmf;
        if (cdf + mass >= u || k >= k_end) {
            return DiscreteQuantile{static_cast<std::int64_t>(k), cdf, mass};
        }
        cdf += mass;
        const double r = ratio(k);
        if (in_log_space) {
            log_pmf += std::log(r);
            if (log_pmf >= -700.0) {
                pmf = std::exp(log_pmf);
                in_log_space = false;
            }
        } else {
            pmf *= r;
        }
        ++k;
    }
}

/// Smallest k such that P(Poisson(xi) > k) < kTailCutoff, from the Bennett
/// tail bound P(X >= xi + z) <= exp(-xi g(z/xi)).
std::uint64_t poisson_scan_end(double xi) {
    const double log_bound = std::log(1.0 / kTailCutoff);
    const double z = xi * bennett_g_inverse_bound(log_bound / std::max(xi, 1e-12));
    return static_cast<std::uint64_t>(std::ceil(xi + z)) + 2;
}

}  // namespace

// ============================================================================
// Discrete quantiles
// ============================================================================

DiscreteQuantile poisson_quantile(double xi, double u) {
    require_probability(u, "quantile level u");
    if (!std::isfinite(xi) || xi < 0.0) {
        throw InvalidParameterError("Poisson mean must be >= 0, got " +
                                    std::to_string(xi));
    }
    if (xi > kMaxPoissonMean) {
        throw UnsupportedParameterError(
            "Poisson mean " + std::to_string(xi) +
            " exceeds the supported maximum of 1e9; quantile scans of that "
            "length are not useful for any detector here");
    }
    if (xi == 0.0) {
        return DiscreteQuantile{0, 0.0, 1.0};
    }
    return scan_quantile(
        -xi, [xi](std::uint64_t k) { return xi / static_cast<double>(k + 1); },
        poisson_scan_end(xi), u);
}

DiscreteQuantile binomial_quantile(std::uint64_t n, double p, double u) {
    require_probability(u, "quantile level u");
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        throw InvalidParameterError(
            "binomial success probability must lie in [0, 1], got " +
            std::to_string(p));
    }
    if (n == 0 || p == 0.0) {
        return DiscreteQuantile{0, 0.0, 1.0};
    }
    if (p == 1.0) {
        return DiscreteQuantile{static_cast<std::int64_t>(n), 0.0, 1.0};
    }
    const double nd = static_cast<double>(n);
    const double log_pmf0 = nd * std::log1p(-p);
    const double odds = p / (1.0 - p);
    return scan_quantile(
        log_pmf0,
        [n, odds, nd](std::uint64_t k) {
            return odds * (nd - static_cast<double>(k)) /
                   static_cast<double>(k + 1);
        },
        n, u);
}

double lower_atom_weight(const DiscreteQuantile & q, double u) {
    if (q.pmf_at <= 0.0) {
        return 0.0;
    }
    return std::clamp((u - q.cdf_below) / q.pmf_at, 0.0, 1.0);
}

double upper_atom_weight(const DiscreteQuantile & q, double u) {
    if (q.pmf_at <= 0.0) {
        return 0.0;
    }
    return std::clamp((q.cdf_at() - u) / q.pmf_at, 0.0, 1.0);
}

// ============================================================================
// Pmf evaluation
// ============================================================================

double poisson_pmf(double xi, std::uint64_t k) {
    if (!std::isfinite(xi) || xi < 0.0) {
        throw InvalidParameterError("Poisson mean must be >= 0, got " +
                                    std::to_string(xi));
    }
    if (xi == 0.0) {
        return k == 0 ? 1.0 : 0.0;
    }
    const double kd = static_cast<double>(k);
    return std::exp(kd * std::log(xi) - xi - std::lgamma(kd + 1.0));
}

double poisson_upper_tail(double xi, std::uint64_t k) {
    if (k == 0) {
        return 1.0;
    }
    // 1 - CDF(k - 1), accumulated from the small side for accuracy: sum the
    // pmf upward from k while it is still significant.
    const std::uint64_t k_end = std::max(poisson_scan_end(xi), k + 1);
    double term = poisson_pmf(xi, k);
    double tail = 0.0;
    for (std::uint64_t j = k; j <= k_end; ++j) {
        tail += term;
        term *= xi / static_cast<double>(j + 1);
        if (term < tail * 1e-18 && term < kTailCutoff) {
            break;
        }
    }
    return std::min(tail, 1.0);
}

double binomial_pmf(std::uint64_t n, double p, std::uint64_t k) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        throw InvalidParameterError(
            "binomial success probability must lie in [0, 1], got " +
            std::to_string(p));
    }
    if (k > n) {
        return 0.0;
    }
    if (p == 0.0) {
        return k == 0 ? 1.0 : 0.0;
    }
    if (p == 1.0) {
        return k == n ? 1.0 : 0.0;
    }
    const double nd = static_cast<double>(n);
    const double kd = static_cast<double>(k);
    const double log_choose = std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) -
                              std::lgamma(nd - kd + 1.0);
    return std::exp(log_choose + kd * std::log(p) +
                    (nd - kd) * std::log1p(-p));
}

// ============================================================================
// Chi-square quantiles
// ============================================================================

namespace {

/// Series expansion of P(a, x), valid and fast for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 10000; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kGammaRelTol) {
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        }
    }
    throw NumericFailureError(
        "incomplete gamma series did not converge for a = " +
        std::to_string(a) + ", x = " + std::to_string(x));
}

/// Modified Lentz continued fraction for Q(a, x) = 1 - P(a, x), x >= a + 1.
double gamma_q_continued_fraction(double a, double x) {
    constexpr double kFloor = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / kFloor;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kFloor) {
            d = kFloor;
        }
        c = b + an / c;
        if (std::abs(c) < kFloor) {
            c = kFloor;
        }
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kGammaRelTol) {
            return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
        }
    }
    throw NumericFailureError(
        "incomplete gamma continued fraction did not converge for a = " +
        std::to_string(a) + ", x = " + std::to_string(x));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(x) || x < 0.0) {
        throw InvalidParameterError(
            "regularized_gamma_p requires a > 0 and x >= 0; got a = " +
            std::to_string(a) + ", x = " + std::to_string(x));
    }
    if (x == 0.0) {
        return 0.0;
    }
    if (x < a + 1.0) {
        return gamma_p_series(a, x);
    }
    return 1.0 - gamma_q_continued_fraction(a, x);
}

double chi_squared_quantile(double df, double u) {
    require_probability(u, "quantile level u");
    if (!(df > 0.0) || !std::isfinite(df)) {
        throw InvalidParameterError(
            "chi-square degrees of freedom must be > 0, got " +
            std::to_string(df));
    }
    const double a = 0.5 * df;
    auto cdf = [a](double x) { return regularized_gamma_p(a, 0.5 * x); };

    // Bracket the quantile, then bisect to relative tolerance 1e-10.
    double lo = 0.0;
    double hi = std::max(df + 20.0 * std::sqrt(2.0 * df), 20.0);
    for (int i = 0; i < 200 && cdf(hi) < u; ++i) {
        hi *= 2.0;
    }
    if (cdf(hi) < u) {
        throw NumericFailureError("failed to bracket the chi-square quantile");
    }
    for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < u) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= kGammaRelTol * std::max(hi, 1.0)) {
            break;
        }
    }
    return 0.5 * (lo + hi);
}

// ============================================================================
// Closed-form quantile bounds
// ============================================================================

double bennett_g(double x) {
    if (!(x >= 0.0)) {
        throw InvalidParameterError("bennett_g requires x >= 0, got " +
                                    std::to_string(x));
    }
    return (1.0 + x) * std::log1p(x) - x;
}

double bennett_g_inverse_bound(double y) {
    if (!(y >= 0.0)) {
        throw InvalidParameterError(
            "bennett_g_inverse_bound requires y >= 0, got " +
            std::to_string(y));
    }
    return 2.0 * y / 3.0 + std::sqrt(2.0 * y);
}

QuantileSandwich poisson_quantile_sandwich(double xi, double u) {
    require_probability(u, "quantile level u");
    if (!(xi >= 0.0)) {
        throw InvalidParameterError("Poisson mean must be >= 0, got " +
                                    std::to_string(xi));
    }
    return QuantileSandwich{xi - std::sqrt(xi / u),
                            xi + std::sqrt(xi / (1.0 - u))};
}

double quad_stat_quantile_bound(double lambda0, double scale, double rho,
                                double u) {
    require_probability(u, "tail level u");
    const double arg = std::log(3.0 / u) / (lambda0 * scale * rho);
    const double ginv = bennett_g_inverse_bound(arg);
    return 2.0 * lambda0 * lambda0 * rho * ginv * ginv;
}

double abs_lin_stat_quantile_bound(double lambda0, double scale, double rho,
                                   double u) {
    require_probability(u, "tail level u");
    const double arg = std::log(2.0 / u) / (lambda0 * rho * scale);
    return lambda0 * scale * rho * bennett_g_inverse_bound(arg);
}

double window_max_quantile_bound(double lambda0, double scale, double ell,
                                 double alpha) {
    require_probability(alpha, "tail level alpha");
    const double ginv =
        bennett_g_inverse_bound(std::log(2.0 / alpha) / (lambda0 * scale));
    return lambda0 * scale * ell + 2.0 * lambda0 * scale * ginv;
}

double window_min_quantile_bound(double lambda0, double scale, double ell,
                                 double alpha) {
    require_probability(alpha, "tail level alpha");
    const double ginv =
        bennett_g_inverse_bound(std::log(2.0 / alpha) / (lambda0 * scale));
    return lambda0 * scale * ell - 2.0 * lambda0 * scale * ginv;
}

double cond_abs_lin_stat_quantile_bound(std::uint64_t n, double rho,
                                        double u) {
    require_probability(u, "tail level u");
    const double log_term = std::log(2.0 / u);
    const double nd = static_cast<double>(n);
    return 2.0 * log_term / 3.0 +
           std::sqrt(nd * rho * (1.0 - rho)) * std::sqrt(2.0 * log_term);
}

}  // namespace pcd
