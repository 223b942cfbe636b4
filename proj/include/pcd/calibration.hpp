#pragma once

/**
 * @file calibration.hpp
 * @brief Monte-Carlo calibration of critical values: per-window quantiles,
 *        Bonferroni and min-p multiplicity corrections, scanning-extremum
 *        and supremum quantiles, and the Laplace reference quantiles.
 *
 * Every critical value is an order statistic of a simulated null pool:
 * the u-quantile of a pool of size B is the entry of ascending rank
 * ceil(u * B) (1-based).  Pools are simulated with deterministic
 * per-replicate substreams, so identical (query, B, seed) yield
 * bit-identical values regardless of thread count.
 *
 * Two null sampling regimes exist:
 *
 *   - unconditional: a homogeneous process with known constant baseline
 *     lambda0 at scale L; window counts are independent Poisson variables;
 *   - conditional on the total count N1 = n: event times are i.i.d.
 *     uniform on (0, 1], so segment counts are multinomial and every
 *     critical value is free of the unknown baseline rate.
 *
 * Multi-window families are calibrated two ways from one shared pool:
 *
 *   - Bonferroni: each window is thresholded at its (1 - alpha/W)-quantile;
 *   - min-p: a dichotomy finds the largest common per-window level u' in
 *     [alpha/W, alpha] whose family-wise empirical rejection probability
 *     stays <= alpha.  Sharing the pool makes the searched probability
 *     monotone in u' by construction and guarantees that min-p thresholds
 *     are pointwise <= the Bonferroni ones.
 *
 * Results are memoized in an optional CriticalValueStore and in in-memory
 * caches owned by the engine.
 */

#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcd/grids.hpp"
#include "pcd/store.hpp"

namespace pcd {

// ============================================================================
// Sampling regimes
// ============================================================================

/// Null sampling regime of a calibration pool.
struct Regime {
    bool conditional = false;  ///< true: condition on the total event count
    double lambda0 = 0.0;      ///< baseline rate (unconditional regime only)
    std::uint64_t n = 0;       ///< conditioning total count (conditional only)
    double scale = 0.0;        ///< observation scale L

    /// Unconditional regime with a known constant baseline.  Requires
    /// lambda0 > 0, scale > 0 and lambda0 * scale <= 1e8 (pool counts must
    /// stay far from integer overflow).
    [[nodiscard]] static Regime known(double lambda0, double scale);

    /// Conditional regime given N1 = n.  Requires scale > 0.
    [[nodiscard]] static Regime given_total(std::uint64_t n, double scale);

    /// Deterministic rendering used in substream tags and cache keys.
    [[nodiscard]] std::string token() const;
};

/// Which scalar statistic a window pool tabulates.
enum class WindowStatKind {
    abs_lin,  ///< absolute centered count |S|
    quad,     ///< quadratic statistic T
};

/// Stable identifier ("abs_lin" / "quad"), used in cache keys.
[[nodiscard]] const char * window_stat_kind_id(WindowStatKind kind);

// ============================================================================
// Options and results
// ============================================================================

/// Knobs shared by every calibration query.
struct CalibrationOptions {
    std::uint64_t budget = 200000;  ///< Monte-Carlo replications B
    std::uint64_t seed = 1;         ///< master calibration seed
    bool allow_compute = true;  ///< false: store lookups only, never simulate
    /// When true, every grid-family calibration additionally simulates an
    /// independent pool (disjoint substreams) and reports the family-wise
    /// rejection probability of the min-p thresholds on it, to audit the
    /// selection effect of calibrating level and thresholds on one pool.
    bool validation_pool = false;
    /// Guard against runaway conditional pools: a conditional regime with
    /// n above this bound raises BudgetError instead of simulating.
    std::uint64_t max_conditional_n = 10000;
};

/// Calibrated thresholds of a multi-window test: one threshold per window,
/// under both multiplicity corrections, extracted from one shared pool.
struct GridFamilyCalibration {
    WindowGrid grid;
    WindowStatKind kind = WindowStatKind::abs_lin;
    Regime regime;
    double alpha = 0.0;
    double bonferroni_level = 0.0;  ///< alpha / (number of windows)
    double minp_level = 0.0;        ///< dichotomy-calibrated common level u'
    std::vector<double> thresholds_bonferroni;  ///< per-window, at 1-alpha/W
    std::vector<double> thresholds_minp;        ///< per-window, at 1-u'
    /// Family-wise rejection probability of the min-p thresholds on the
    /// independent validation pool; -1 when no validation was requested.
    double validated_size = -1.0;
    std::vector<std::string> warnings;
};

/// Calibrated two-sided thresholds for the paired scanning-extremum test
/// (minimum scanned count against a lower critical value, maximum against
/// an upper one), under both corrections, from one shared pool.
struct ScanExtremaCalibration {
    double ell = 0.0;               ///< scanned window length
    Regime regime;
    double alpha = 0.0;
    double bonferroni_level = 0.0;  ///< alpha / 2 per side
    double minp_level = 0.0;        ///< dichotomy-calibrated per-side level
    double upper_bonferroni = 0.0;  ///< (1 - alpha/2)-quantile of the max
    double lower_bonferroni = 0.0;  ///< (alpha/2)-quantile of the min
    double upper_minp = 0.0;        ///< (1 - u')-quantile of the max
    double lower_minp = 0.0;        ///< (u')-quantile of the min
    std::vector<std::string> warnings;
};

// ============================================================================
// Engine
// ============================================================================

/**
 * @brief Simulates, memoizes and serves Monte-Carlo critical values.
 *
 * The engine owns in-memory caches and optionally persists through a
 * CriticalValueStore (not owned).  When every record of a query is present
 * in the store, the query is served without simulation; a partial hit
 * triggers a full recomputation (all values of one query must come from one
 * pool).  With CalibrationOptions::allow_compute == false a miss raises
 * CalibrationRequiredError naming the missing record.
 *
 * Public methods are serialized by an internal mutex; returned references
 * stay valid until clear_cache() (the cache is node-based).  Heavy pool
 * work parallelizes internally over deterministic substreams.
 *
 * Budget handling: budget == 0 raises BudgetError; budgets below 10,000
 * attach a warning to the result (grid families and scan pairs) because
 * tail order statistics are then too noisy for level-alpha guarantees.
 */
class CalibrationEngine {
  public:
    /// The store may be null (purely in-memory operation).
    explicit CalibrationEngine(CriticalValueStore * store = nullptr);

    CalibrationEngine(const CalibrationEngine &) = delete;
    CalibrationEngine & operator=(const CalibrationEngine &) = delete;

    /**
     * @brief Calibrates a multi-window family: per-window thresholds of the
     * chosen statistic under both corrections plus the min-p level.
     *
     * The pool simulates, per replicate, the counts of every segment cut by
     * the grid (independent Poisson in the unconditional regime, a
     * multinomial split of n in the conditional one) and maps window counts
     * through the statistic kernel.  The min-p dichotomy runs on the exact
     * per-window pool ranks, to absolute tolerance 1e-6 on the level or 40
     * iterations.
     *
     * Throws DegenerateWindowError when kind == quad is requested on a
     * conditional full-interval window, and CalibrationFailureError when
     * the dichotomy cannot bracket (family-wise rejection above alpha even
     * at the Bonferroni level, impossible on a well-formed pool).
     */
    [[nodiscard]] const GridFamilyCalibration & grid_family(
        const WindowGrid & grid, WindowStatKind kind, const Regime & regime,
        double alpha, const CalibrationOptions & options);

    /**
     * @brief Calibrates the paired scanning-extremum test at window length
     * ell: lower/upper critical counts for the scanned minimum/maximum
     * under both corrections (alpha/2 per side for Bonferroni; common
     * per-side level in [alpha/2, alpha] for min-p).
     */
    [[nodiscard]] const ScanExtremaCalibration & scan_extrema(
        double ell, const Regime & regime, double alpha,
        const CalibrationOptions & options);

    /// u-quantile of the maximum scanned count at window length ell.
    [[nodiscard]] double scan_max_quantile(double ell, const Regime & regime,
                                           double u,
                                           const CalibrationOptions & options);

    /// u-quantile of the minimum scanned count at window length ell.
    [[nodiscard]] double scan_min_quantile(double ell, const Regime & regime,
                                           double u,
                                           const CalibrationOptions & options);

    /// u-quantile of sup over ell of the shifted statistic on windows
    /// (tau_star, tau_star + ell] (exact supremum evaluator per replicate).
    [[nodiscard]] double sup_length_quantile(
        double tau_star, double delta_star, const Regime & regime, double u,
        const CalibrationOptions & options);

    /// u-quantile of sup over tau of the shifted statistic on windows
    /// (tau, 1].
    [[nodiscard]] double sup_location_quantile(
        double delta_star, const Regime & regime, double u,
        const CalibrationOptions & options);

    /**
     * @brief u-quantile of a single-window statistic (grid machinery on a
     * one-window grid, so the value is memoized under the same scheme).
     */
    [[nodiscard]] double window_stat_quantile(double tau1, double tau2,
                                              WindowStatKind kind,
                                              const Regime & regime, double u,
                                              const CalibrationOptions & options);

    /**
     * @brief u-quantile of the sum of n i.i.d. uniform variables on [0, 1]
     * (the Laplace reference quantile q_n).
     *
     * n = 0 returns 0 (the empty sum is degenerate at 0); n = 1 returns u
     * exactly (analytic); n >= 2 uses a Monte-Carlo pool of B sums.  The
     * value is scale-free, so records carry no baseline or scale.
     */
    [[nodiscard]] double laplace_sum_quantile(std::uint64_t n, double u,
                                              const CalibrationOptions & options);

    /// Drops the in-memory caches (the persistent store is untouched).
    /// Invalidates references returned by grid_family / scan_extrema.
    void clear_cache();

  private:
    /// One-slot cache of the latest segment pool (grid/regime/budget/seed
    /// keyed); consecutive calibrations of the linear and quadratic family
    /// on the same grid then share one simulation.
    struct MatrixSlot {
        std::string key;
        std::vector<std::uint32_t> prefix;  ///< B rows of (segments + 1)
        std::size_t row = 0;                ///< row stride
    };

    /// Fills matrix_slot_ with the segment pool of (grid, regime), reusing
    /// it when already resident.  The salt separates stream families (the
    /// validation pool uses a distinct salt).
    void ensure_segment_pool(const WindowGrid & grid, const Regime & regime,
                             const CalibrationOptions & options,
                             const std::string & salt);

    [[nodiscard]] GridFamilyCalibration compute_grid_family(
        const WindowGrid & grid, WindowStatKind kind, const Regime & regime,
        double alpha, const CalibrationOptions & options);

    [[nodiscard]] ScanExtremaCalibration compute_scan_extrema(
        double ell, const Regime & regime, double alpha,
        const CalibrationOptions & options);

    /// Central scalar-quantile path: cache and store lookup, else
    /// compute-and-record via the callback.
    [[nodiscard]] double scalar_quantile(
        const StoreKey & key, const CalibrationOptions & options,
        const std::function<double()> & compute);

    CriticalValueStore * store_;
    std::mutex mutex_;
    std::unordered_map<std::string, GridFamilyCalibration> family_cache_;
    std::unordered_map<std::string, ScanExtremaCalibration> scan_cache_;
    std::unordered_map<std::string, double> scalar_cache_;
    MatrixSlot matrix_slot_;
};

}  // namespace pcd
