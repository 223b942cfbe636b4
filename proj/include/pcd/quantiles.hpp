#pragma once

/**
 * @file quantiles.hpp
 * @brief Exact discrete quantiles, randomization weights, chi-square
 *        quantiles and closed-form quantile bounds.
 *
 * Discrete quantiles follow the "smallest k such that CDF(k) >= u"
 * convention.  Each quantile comes with the CDF mass strictly below it and
 * the probability mass at it, which is exactly what the randomized tests
 * need to hit a prescribed size on an atom.
 *
 * The closed-form bounds at the bottom are analytic envelopes for
 * Monte-Carlo critical values: quadratic-statistic quantiles, centered count
 * quantiles, scanning extrema and their conditional analogues.  They use the
 * convex function g(x) = (1+x)log(1+x) - x through the explicit bound
 * g^{-1}(y) <= 2y/3 + sqrt(2y).
 */

#include <cstdint>

namespace pcd {

// ============================================================================
// Discrete quantiles with atom information
// ============================================================================

/// A discrete u-quantile together with the local CDF geometry.
struct DiscreteQuantile {
    std::int64_t value = 0;   ///< smallest k with CDF(k) >= u
    double cdf_below = 0.0;   ///< P(X < value)
    double pmf_at = 0.0;      ///< P(X = value)

    /// P(X <= value).
    [[nodiscard]] double cdf_at() const noexcept { return cdf_below + pmf_at; }
};

/**
 * @brief u-quantile of the Poisson distribution with mean xi.
 *
 * Evaluated by accumulating the pmf recursively from k = 0 (the recursion
 * runs in log space until the pmf becomes representable, so large means do
 * not underflow).  If the requested u exceeds the accumulated mass once the
 * upper tail falls below 1e-15, the last scanned k is returned; the ignored
 * tail is below that cutoff.
 *
 * Throws InvalidParameterError for u outside (0, 1) or xi < 0, and
 * UnsupportedParameterError for xi > 1e9 (the scan would be unreasonably
 * long; no detector in this library gets anywhere near such a mean).
 */
[[nodiscard]] DiscreteQuantile poisson_quantile(double xi, double u);

/**
 * @brief u-quantile of the binomial distribution with n trials and success
 * probability p.  Same conventions as poisson_quantile; n = 0 yields the
 * point mass at 0.
 */
[[nodiscard]] DiscreteQuantile binomial_quantile(std::uint64_t n, double p,
                                                 double u);

/**
 * @brief Lower randomization weight at a discrete u-quantile.
 *
 * For a lower-tail test that rejects on {X < q} and with weight g on
 * {X = q}, the exact size u requires g = (u - P(X < q)) / P(X = q).  The
 * result is clipped to [0, 1] to absorb roundoff.
 */
[[nodiscard]] double lower_atom_weight(const DiscreteQuantile & q, double u);

/**
 * @brief Upper randomization weight at a discrete u-quantile.
 *
 * For an upper-tail test that rejects on {X > q} and with weight g on
 * {X = q}, the exact size 1 - u requires g = (CDF(q) - u) / P(X = q).
 * The result is clipped to [0, 1].
 */
[[nodiscard]] double upper_atom_weight(const DiscreteQuantile & q, double u);

// ============================================================================
// Pmf evaluation (exact-size computations)
// ============================================================================

/// Poisson pmf at k, evaluated in log space (stable for large xi).
[[nodiscard]] double poisson_pmf(double xi, std::uint64_t k);

/// P(X >= k) for X Poisson with mean xi (summed from the pmf recursion).
[[nodiscard]] double poisson_upper_tail(double xi, std::uint64_t k);

/// Binomial pmf at k, evaluated in log space (stable for large n).
[[nodiscard]] double binomial_pmf(std::uint64_t n, double p, std::uint64_t k);

// ============================================================================
// Chi-square quantiles
// ============================================================================

/**
 * @brief Regularized lower incomplete gamma P(a, x).
 *
 * Series expansion for x < a + 1, Lentz continued fraction otherwise, both
 * iterated to relative tolerance 1e-10.  Throws NumericFailureError if
 * either expansion fails to converge.
 */
[[nodiscard]] double regularized_gamma_p(double a, double x);

/**
 * @brief u-quantile of the chi-square distribution with df degrees of
 * freedom, solved by bisection on the regularized incomplete gamma to
 * relative tolerance 1e-10.
 */
[[nodiscard]] double chi_squared_quantile(double df, double u);

// ============================================================================
// Closed-form quantile bounds
// ============================================================================

/// g(x) = (1+x)log(1+x) - x for x >= 0.
[[nodiscard]] double bennett_g(double x);

/// The explicit envelope g^{-1}(y) <= 2y/3 + sqrt(2y) for y >= 0.
[[nodiscard]] double bennett_g_inverse_bound(double y);

/// Two-sided sandwich for the Poisson u-quantile:
/// xi - sqrt(xi/u) <= quantile <= xi + sqrt(xi/(1-u)).
struct QuantileSandwich {
    double lower = 0.0;
    double upper = 0.0;
};
[[nodiscard]] QuantileSandwich poisson_quantile_sandwich(double xi, double u);

/// Upper bound for the (1-u)-quantile of the quadratic window statistic
/// under a constant baseline: 2 lambda0^2 rho (g^{-1}(log(3/u)/(lambda0 L
/// rho)))^2 with rho the window length.
[[nodiscard]] double quad_stat_quantile_bound(double lambda0, double scale,
                                              double rho, double u);

/// Upper bound for the (1-u)-quantile of the absolute centered window count
/// under a constant baseline: lambda0 L rho g^{-1}(log(2/u)/(lambda0 rho L)).
[[nodiscard]] double abs_lin_stat_quantile_bound(double lambda0, double scale,
                                                 double rho, double u);

/// Upper bound for the (1-alpha)-quantile of the scanning window maximum:
/// lambda0 L ell + 2 lambda0 L g^{-1}(log(2/alpha)/(lambda0 L)).
[[nodiscard]] double window_max_quantile_bound(double lambda0, double scale,
                                               double ell, double alpha);

/// Lower bound for the alpha-quantile of the scanning window minimum:
/// lambda0 L ell - 2 lambda0 L g^{-1}(log(2/alpha)/(lambda0 L)).
[[nodiscard]] double window_min_quantile_bound(double lambda0, double scale,
                                               double ell, double alpha);

/// Upper bound for the conditional (1-u)-quantile of the absolute centered
/// window count given n total events:
/// (2/3) log(2/u) + sqrt(n rho (1-rho)) sqrt(2 log(2/u)).
[[nodiscard]] double cond_abs_lin_stat_quantile_bound(std::uint64_t n,
                                                      double rho, double u);

}  // namespace pcd
