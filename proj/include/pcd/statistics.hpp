#pragma once

/**
 * @file statistics.hpp
 * @brief Window statistics for change detection, exact supremum evaluators
 *        and moment formulas.
 *
 * All statistics are functions of counts over half-open windows (tau1, tau2]
 * of an event sample at scale L.  Two families exist side by side:
 *
 *   - "known baseline" statistics center counts at their expectation
 *     lambda0 * L * (tau2 - tau1) under a known constant rate lambda0;
 *   - "conditional" statistics center at the conditional expectation
 *     (tau2 - tau1) * N1 given the total event count N1, which removes the
 *     unknown constant rate from the null distribution entirely (given N1,
 *     the event times of a constant-rate process are i.i.d. uniform).
 *
 * The shifted statistics additionally subtract half of the signal a change
 * of prescribed height delta_star would add, so that thresholding them at a
 * null quantile balances errors symmetrically against that alternative.
 *
 * The quadratic statistics are unbiased estimators of the squared energy
 * distance between the true intensity and the no-change family; their
 * moments under arbitrary window masses are given by moments_quad and
 * moments_quad_cond, which the Monte-Carlo tests validate.
 */

#include <cstdint>

#include "pcd/event_sample.hpp"

namespace pcd {

// ============================================================================
// Window statistics, known constant baseline
// ============================================================================

/// Centered count: count(tau1, tau2] - lambda0 * L * (tau2 - tau1).
/// Requires 0 <= tau1 < tau2 <= 1 and lambda0 > 0.
[[nodiscard]] double lin_stat_known(const EventSample & sample, double tau1,
                                    double tau2, double lambda0);

/// Shifted centered count against a change of height delta_star:
/// sgn(delta_star) * lin_stat_known - |delta_star| * L * (tau2 - tau1) / 2.
/// Requires delta_star != 0.
[[nodiscard]] double shifted_stat_known(const EventSample & sample,
                                        double tau1, double tau2,
                                        double lambda0, double delta_star);

/// Quadratic window statistic, an unbiased estimator of the squared energy
/// distance to the constant rate lambda0 restricted to the window:
/// (c^2 - c) / (L^2 (tau2-tau1)) - 2 lambda0 c / L + lambda0^2 (tau2-tau1).
[[nodiscard]] double quad_stat_known(const EventSample & sample, double tau1,
                                     double tau2, double lambda0);

// ============================================================================
// Window statistics, conditional on the total count
// ============================================================================

/// Conditionally centered count: count(tau1, tau2] - (tau2 - tau1) * N1.
[[nodiscard]] double lin_stat_cond(const EventSample & sample, double tau1,
                                   double tau2);

/// Shifted conditionally centered count:
/// sgn(delta_star) * lin_stat_cond
///   - |delta_star| * L * (tau2-tau1) * (1 - tau2 + tau1) / 2.
[[nodiscard]] double shifted_stat_cond(const EventSample & sample, double tau1,
                                       double tau2, double delta_star);

/**
 * @brief Conditional quadratic window statistic.
 *
 * With rho = tau2 - tau1, A the number of events outside the window and B
 * the number inside:
 *
 *   (1/L^2) [ (rho/(1-rho)) (A^2 - A) + ((1-rho)/rho) (B^2 - B) - 2 A B ].
 *
 * Requires 0 <= tau1 < tau2 <= 1; throws DegenerateWindowError when
 * rho = 1 (the complement is empty and the statistic is undefined).
 */
[[nodiscard]] double quad_stat_cond(const EventSample & sample, double tau1,
                                    double tau2);

// ============================================================================
// Count-level kernels
// ============================================================================
//
// The Monte-Carlo calibration pools simulate window counts directly, without
// materializing event times.  These kernels are the single arithmetic path
// shared by the pooled statistics and the sample-based evaluations above, so
// a threshold extracted from a pool compares bit-identically against the
// statistic computed on an observed sample.  Preconditions are NOT checked
// here (the sample-based wrappers and the calibration engine validate them
// once, outside the replicate loops).

/// count - lambda0 * rho * scale, with rho the window length.
[[nodiscard]] double lin_kernel_known(double count, double rho,
                                      double lambda0, double scale);

/// Quadratic statistic from a raw count under a known constant baseline.
[[nodiscard]] double quad_kernel_known(double count, double rho,
                                       double lambda0, double scale);

/// count - rho * total, the conditionally centered count given N1 = total.
[[nodiscard]] double lin_kernel_cond(double count, double rho, double total);

/// Conditional quadratic statistic from the inside/outside split of the
/// total count.  Requires rho < 1 (callers validate).
[[nodiscard]] double quad_kernel_cond(double inside, double outside,
                                      double rho, double scale);

// ============================================================================
// Exact supremum evaluators
// ============================================================================

/// A supremum over an open parameter range: the value, the argument at which
/// it is attained or approached, and whether it is attained (false means the
/// value is a one-sided limit at `arg`).
struct SupResult {
    double value = 0.0;
    double arg = 0.0;
    bool attained = false;
};

/**
 * @brief Exact sup over ell in (0, 1 - tau_star) of the shifted statistic on
 * the growing window (tau_star, tau_star + ell].
 *
 * Between event entries the statistic is a convex function of ell (linear
 * for the known-baseline variant, convex quadratic for the conditional one),
 * so on each piece the supremum sits at an endpoint.  The evaluator scans
 * the piece endpoints: the limit at ell -> 0+ (value 0), the attained value
 * and the left limit at each entry, and the limit at the right boundary.
 * Ties resolve to the smallest ell, preferring attained values.
 *
 * Set `known_baseline` to choose the centering; `lambda0` is ignored for the
 * conditional variant.
 */
[[nodiscard]] SupResult sup_shifted_over_length(const EventSample & sample,
                                                double tau_star,
                                                double delta_star,
                                                bool known_baseline,
                                                double lambda0 = 1.0);

/**
 * @brief Exact sup over tau in (0, 1) of the shifted statistic on the
 * right-anchored window (tau, 1].
 *
 * Same piecewise-convexity argument as sup_shifted_over_length, with pieces
 * delimited by the event times: the count drops (attained) as tau passes an
 * event.  Scanned candidates: the limit at tau -> 0+, the attained value and
 * left limit at each event in (0, 1), and the limit at tau -> 1- (where only
 * events exactly at time 1 remain in the window).
 */
[[nodiscard]] SupResult sup_shifted_over_location(const EventSample & sample,
                                                  double delta_star,
                                                  bool known_baseline,
                                                  double lambda0 = 1.0);

// ============================================================================
// Moment formulas for the quadratic statistics
// ============================================================================

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/**
 * @brief Exact mean and variance of the known-baseline quadratic statistic
 * when the window count is Poisson with mean L * x.
 *
 * With rho = tau2 - tau1:
 *   mean = (x / sqrt(rho) - lambda0 sqrt(rho))^2,
 *   variance = (4x/L)(x/rho - lambda0)^2 + 2 x^2 / (L^2 rho^2).
 */
[[nodiscard]] Moments moments_quad(double x, double tau1, double tau2,
                                   double lambda0, double scale);

/**
 * @brief Exact mean and variance of the conditional quadratic statistic
 * when the three segment counts N(0,tau1], N(tau1,tau2], N(tau2,1] are
 * independent Poisson with means L*x, L*y, L*z.
 *
 * With rho = tau2 - tau1, a = rho/(1-rho), b = (1-rho)/rho:
 *   mean = (sqrt(a) (x+z) - sqrt(b) y)^2,
 *   variance = (2/L^2)(a(x+z) + b y)^2
 *            + (4/L) b^2 (y - a(x+z))^2 (a^2 (x+z) + y).
 *
 * x and z may be 0 (the formulas extend continuously); y must be > 0.
 */
[[nodiscard]] Moments moments_quad_cond(double x, double y, double z,
                                        double tau1, double tau2,
                                        double scale);

}  // namespace pcd
