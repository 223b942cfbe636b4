#pragma once

/**
 * @file detectors.hpp
 * @brief The detector catalogue: single-window, scanning, aggregated and
 * supremum tests for an abrupt intensity change, under a known constant
 * baseline or conditionally on the total event count.
 *
 * Every detector rejects for large (or small) values of exact count
 * statistics; critical values are either closed-form discrete quantiles
 * (single-window families) or Monte-Carlo quantiles served by a
 * CalibrationEngine.  A detector is specified declaratively by a
 * DetectorSpec and evaluated by run_detector(), which returns a TestReport
 * with the full per-component comparison ledger.
 *
 * Conventions shared by the whole catalogue:
 *   - all comparisons against critical values are strict;
 *   - only the four single-window count tests (phi1_minus / phi1_plus /
 *     phi2_lin, in both baseline regimes) randomize on the critical atom;
 *     every other family is deterministic given the sample;
 *   - conditional families never estimate the baseline rate: they condition
 *     on the observed total count and are distribution-free under the null.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcd/calibration.hpp"
#include "pcd/event_sample.hpp"
#include "pcd/grids.hpp"

namespace pcd {

// ============================================================================
// Families
// ============================================================================

/// Detector family identifiers.  The `_known` half assumes a known constant
/// baseline rate; the `_cond` half conditions on the total event count (for
/// an unknown, bounded baseline).  `laplace` and `z_test` are the classical
/// conditional uniformity references.
enum class Family {
    // ---- known constant baseline -------------------------------------
    phi1_minus_known,    ///< one-sided count test, decrease, known window
    phi1_plus_known,     ///< one-sided count test, increase, known window
    phi2_lin_known,      ///< two-sided randomized count test (UMPU split)
    phi2_quad_known,     ///< quadratic statistic on the known window
    phi3_lin_minus_known,  ///< scanned minimum count at a known length
    phi3_lin_plus_known,   ///< scanned maximum count at a known length
    phi4_lin_known,        ///< two-sided scanned extrema at a known length
    phi3_4_quad_known,     ///< quadratic statistics on shifted windows
    phi5_known,          ///< sup over lengths of the shifted statistic
    phi6_lin_known,      ///< |S| on dyadic lengths from a known start
    phi6_quad_known,     ///< T on dyadic lengths from a known start
    phi7_known,          ///< sup over locations of the shifted statistic
    phi8_lin_known,      ///< |S| on right-anchored location windows
    phi8_quad_known,     ///< T on right-anchored location windows
    phi9_10_lin_known,   ///< |S| on the full triangle of windows
    phi9_10_quad_known,  ///< T on the full triangle of windows
    // ---- conditional on the total count ------------------------------
    phi1_minus_cond,
    phi1_plus_cond,
    phi2_lin_cond,
    phi2_quad_cond,
    phi3_lin_minus_cond,
    phi3_lin_plus_cond,
    phi4_lin_cond,
    phi3_4_quad_cond,
    phi5_cond,
    phi6_lin_cond,
    phi6_quad_cond,
    phi7_cond,
    phi8_lin_cond,
    phi8_quad_cond,
    phi9_10_lin_cond,
    phi9_10_quad_cond,
    // ---- conditional uniformity references ---------------------------
    laplace,  ///< two-sided test on the sum of event times
    z_test,   ///< two-sided test on -2 sum log(event times)
};

/// Stable identifier of a family ("phi9_10_quad_known", "laplace", ...).
[[nodiscard]] const char * family_id(Family family);

/// Parses a family identifier; throws InvalidParameterError on unknown ids.
[[nodiscard]] Family family_from_id(const std::string & id);

/// All families, in declaration order.
[[nodiscard]] const std::vector<Family> & all_families();

/// True for the `_cond` families and the uniformity references: the
/// detector conditions on the total count and never uses a baseline rate.
[[nodiscard]] bool family_is_conditional(Family family);

// ============================================================================
// Specification
// ============================================================================

/// Baseline regime declared by a detector specification.
struct Baseline {
    bool known = true;     ///< true: constant baseline with a known rate
    double lambda0 = 1.0;  ///< the known rate (known regime only)
    double bound = 1.0;    ///< a-priori sup bound on the rate (unknown regime)

    /// Known constant baseline with rate lambda0 > 0.
    [[nodiscard]] static Baseline known_rate(double lambda0);

    /// Unknown baseline, bounded by `bound` > 0; detectors in this regime
    /// condition on the total count, so the bound is declarative only.
    [[nodiscard]] static Baseline unknown_bounded(double bound);
};

/// Multiple-testing correction for the multi-window families.
enum class Correction {
    bonferroni,  ///< per-window level alpha / (number of windows)
    min_p,       ///< common per-window level calibrated by dichotomy
};

/// Stable identifier ("bonferroni" / "min_p").
[[nodiscard]] const char * correction_id(Correction correction);

/// Parses a correction identifier; throws InvalidParameterError.
[[nodiscard]] Correction correction_from_id(const std::string & id);

/**
 * @brief Declarative description of one detector instance.
 *
 * The optional change parameters must be present exactly when the family
 * requires them (run_detector validates and throws
 * InvalidParameterError otherwise):
 *
 *   - tau_star:  phi1 / phi2 (window start), phi5 (sup start), phi6
 *     (dyadic-length start);
 *   - ell_star:  phi1 / phi2 (window length), phi3 / phi4 and the shifted
 *     quadratic scan (scanned length);
 *   - delta_star: phi5 / phi7 (reference change height, nonzero; above
 *     -lambda0 under a known baseline);
 *   - location_grid: phi8 families only; theta_d (default) or theta_r for
 *     the known-baseline pair, theta_d_u (default) or theta_r_u for the
 *     conditional pair.
 *
 * The baseline regime must match the family half: `_known` families
 * require a known baseline, `_cond` families an unknown bounded one; the
 * uniformity references accept either.
 */
struct DetectorSpec {
    Family family = Family::laplace;
    Baseline baseline{};
    double alpha = 0.05;  ///< nominal level, in (0, 1)
    Correction correction = Correction::bonferroni;
    std::optional<double> tau_star;
    std::optional<double> ell_star;
    std::optional<double> delta_star;
    std::optional<GridPreset> location_grid;
    std::uint64_t budget = 200000;  ///< Monte-Carlo calibration budget
    std::uint64_t seed = 1;         ///< master calibration seed
    /// When set, a randomized decision is realized as Reject/Accept with an
    /// auxiliary uniform drawn deterministically from this seed.
    std::optional<std::uint64_t> aux_seed;

    /// Serializes to a JSON object (family and correction as id strings,
    /// optional fields omitted when absent).
    [[nodiscard]] std::string to_json() const;

    /// Parses the JSON produced by to_json(); unknown keys are rejected.
    /// Throws InvalidParameterError on malformed input.
    [[nodiscard]] static DetectorSpec from_json(const std::string & text);
};

// ============================================================================
// Reports
// ============================================================================

/// Final decision of a detector run.
enum class Decision {
    accept,             ///< no component exceeded its critical value
    reject,             ///< some strict exceedance (or realized atom)
    randomized_reject,  ///< on a critical atom: reject with the given
                        ///< probability (only the randomized families)
};

/// Stable identifier ("accept" / "reject" / "randomized_reject").
[[nodiscard]] const char * decision_id(Decision decision);

/// One comparison row of the report ledger.
struct WindowEntry {
    double tau1 = 0.0;       ///< window (tau1, tau2] the row refers to
    double tau2 = 1.0;
    double stat = 0.0;       ///< observed statistic on that window
    double threshold = 0.0;  ///< critical value it was compared against
    /// Signed exceedance, positive iff this row fires: stat - threshold
    /// for upper comparisons, threshold - stat for lower ones.
    double margin = 0.0;
    std::string label;       ///< row kind: "upper", "lower", "window",
                             ///< "sup_length", "sup_location"
};

/**
 * @brief Full account of one detector evaluation.
 *
 * `reject_probability` is the conditional rejection probability given the
 * sample: 1 for Reject, 0 for Accept, and the critical-atom weight for
 * RandomizedReject.  When an auxiliary uniform realizes a randomized
 * decision, `decision` carries the realized outcome, `reject_probability`
 * keeps the atom weight, and `aux_uniform` records the drawn uniform.
 */
struct TestReport {
    std::string family;  ///< family identifier
    Decision decision = Decision::accept;
    double reject_probability = 0.0;
    double resolved_level = 0.0;  ///< per-component level after correction
    std::vector<WindowEntry> windows;
    std::vector<std::string> warnings;
    std::uint64_t calibration_seed = 0;
    std::optional<std::uint64_t> aux_seed;
    std::optional<double> aux_uniform;
    /// Energy distance of the simulated alternative to the null class, when
    /// a harness that knows the generating profile records it; negative
    /// otherwise.
    double d2_alternative = -1.0;

    /// Serializes to a JSON object mirroring the fields above.
    [[nodiscard]] std::string to_json() const;
};

// ============================================================================
// Evaluation
// ============================================================================

/// Evaluation-time knobs independent of the test definition.
struct RunOptions {
    /// false: serve critical values from the persistent store only; a miss
    /// raises CalibrationRequiredError instead of simulating.
    bool allow_calibration = true;
    /// Forwarded to the calibration engine (audit pool for min-p families).
    bool validation_pool = false;
    /// Forwarded guard against runaway conditional calibrations.
    std::uint64_t max_conditional_n = 10000;
};

/**
 * @brief Runs one detector on one sample.
 *
 * Deterministic given (spec, sample, engine state): calibration substreams
 * derive from spec.seed, the optional randomization realization from
 * spec.aux_seed.  Throws InvalidParameterError on a malformed or
 * inconsistent specification, and propagates calibration-layer errors
 * (CalibrationRequiredError, BudgetError, UnsupportedScaleError, ...).
 */
[[nodiscard]] TestReport run_detector(const DetectorSpec & spec,
                                      const EventSample & sample,
                                      CalibrationEngine & engine,
                                      const RunOptions & options = {});

// ============================================================================
// Randomized two-sided splits
// ============================================================================

/**
 * @brief The two-sided randomized count test attaining exact level alpha
 * and unbiasedness: reject above `upper_boundary` and below
 * `lower_boundary`, randomize on the boundaries with the given weights.
 *
 * The split (alpha1, alpha2), alpha1 + alpha2 = alpha, solves the two
 * moment constraints E[phi] = alpha and E[X phi] = alpha E[X] under the
 * null count distribution, by bisection on alpha1 (the residual of the
 * second constraint is continuous and increasing in alpha1).  When the two
 * boundaries coincide, the two atom weights apply to the same point and
 * their sum (capped at 1) is the effective randomization weight.
 */
struct UmpuSplit {
    double alpha1 = 0.0;  ///< upper-tail share of the level
    double alpha2 = 0.0;  ///< lower-tail share (alpha1 + alpha2 = alpha)
    std::uint64_t lower_boundary = 0;  ///< reject strictly below
    std::uint64_t upper_boundary = 0;  ///< reject strictly above
    double gamma_lower = 0.0;  ///< randomization weight at lower_boundary
    double gamma_upper = 0.0;  ///< randomization weight at upper_boundary
};

/**
 * @brief UMPU split for the known-baseline window count, Poisson with mean
 * lambda0 * ell_star * scale.
 *
 * Expectations are exact partial sums of the pmf (upper tail truncated at
 * relative mass 1e-12); the bisection stops when the second-constraint
 * residual falls below 1e-10 (relative to the mean).  Throws
 * NumericFailureError if the residual does not bracket a root.
 */
[[nodiscard]] UmpuSplit umpu_split_known(double lambda0, double ell_star,
                                         double scale, double alpha);

/**
 * @brief UMPU split for the conditional window count, Binomial(n, ell_star).
 *
 * Expectations are exact finite sums.  n = 0 returns the degenerate split
 * (alpha/2, alpha/2) with both boundaries at zero, so the count 0 draws the
 * combined atom alpha.
 */
[[nodiscard]] UmpuSplit umpu_split_conditional(std::uint64_t n,
                                               double ell_star, double alpha);

// ============================================================================
// Conditional uniformity references
// ============================================================================

/**
 * @brief Two-sided test on the sum of event times: given n events, the sum
 * of times is compared against the Monte-Carlo (alpha/2)- and
 * (1 - alpha/2)-quantiles of a sum of n independent uniforms.  An empty
 * sample accepts.
 */
[[nodiscard]] TestReport laplace_test(const EventSample & sample, double alpha,
                                      CalibrationEngine & engine,
                                      const RunOptions & options = {});

/**
 * @brief Two-sided test on -2 sum log(event times): given n events the
 * statistic is chi-squared with 2n degrees of freedom under the null, and
 * is compared against the exact (alpha/2)- and (1 - alpha/2)-quantiles.
 * An empty sample accepts.  Needs no Monte-Carlo calibration.
 */
[[nodiscard]] TestReport z_test(const EventSample & sample, double alpha);

}  // namespace pcd
