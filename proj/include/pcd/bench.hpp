#pragma once

/**
 * @file bench.hpp
 * @brief Size/power benchmarking of the detector catalogue against embedded
 * reference tables.
 *
 * The benchmark reproduces a fixed experiment design: a unit-rate constant
 * baseline at observation scale L = 100, level 0.05, jump alternatives
 * 1 + delta 1_{(tau, 1]} and bump alternatives 1 + delta 1_{(tau, tau+ell]}
 * over small grids of (delta, tau, ell), with a battery of reference
 * detectors (the conditional uniformity references plus the calibrated
 * location and triangle families under min-p correction).  Estimated
 * rejection probabilities are compared cell-by-cell against embedded
 * reference values, with a deviation flag when |difference| exceeds three
 * pooled Monte-Carlo standard errors.
 *
 * Every estimate realizes randomized decisions through per-replicate
 * auxiliary uniforms, and every replicate draws from a deterministic
 * substream of the master seed, so identical configurations reproduce
 * byte-for-byte identical tables.
 */

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcd/calibration.hpp"
#include "pcd/detectors.hpp"
#include "pcd/event_sample.hpp"

namespace pcd {

// ============================================================================
// Reference data
// ============================================================================

/// One reference-table row: a detector label and its tabulated rejection
/// probabilities (one per delta for power tables, a single entry for size
/// tables).
struct ReferenceRow {
    std::string detector;
    std::vector<double> values;
};

/// One embedded reference table.
struct ReferenceTable {
    std::string id;        ///< stable table identifier ("size_known", ...)
    std::string caption;   ///< table caption, for traceability
    std::string kind;      ///< "size" or "power"
    bool known_baseline = true;
    std::uint64_t reps = 0;  ///< replication count behind the reference
    std::string scenario;    ///< "jump" or "bump" (power tables)
    double tau = 0.0;        ///< change location (power tables)
    double ell = 0.0;        ///< bump length (bump scenario only)
    std::vector<ReferenceRow> rows;
};

/// All embedded reference tables, parsed once from the versioned data file
/// compiled into the library.
[[nodiscard]] const std::vector<ReferenceTable> & reference_tables();

/// Looks up a reference table by id; throws InvalidParameterError with the
/// unknown id in the message.
[[nodiscard]] const ReferenceTable & reference_table(const std::string & id);

/// The shared change-height grid of the power tables, in ascending order.
[[nodiscard]] const std::vector<double> & reference_delta_grid();

/// Maps a reference-table detector label ("la", "cp1_theta_d", "tc2u", ...)
/// to its detector specification: family, location-grid preset, min-p
/// correction and baseline declaration (known rate lambda0, or an unknown
/// baseline bounded by 2).  alpha, budget and seed are filled from the
/// arguments.  Throws InvalidParameterError on an unknown label.
[[nodiscard]] DetectorSpec detector_for_label(const std::string & label,
                                              double lambda0, double alpha,
                                              std::uint64_t budget,
                                              std::uint64_t seed);

// ============================================================================
// Point estimates
// ============================================================================

/// A Monte-Carlo rejection-probability estimate.
struct Estimate {
    double value = 0.0;        ///< rejection fraction
    double stderr_value = 0.0; ///< sqrt(value (1 - value) / reps), exactly
    std::uint64_t reps = 0;
};

/**
 * @brief Estimated size: the fraction of `reps` null samples (constant
 * baseline lambda0 at scale L) the detector rejects.
 *
 * Randomized decisions are realized with per-replicate auxiliary uniforms.
 * Replicate samples draw from substreams of `seed` disjoint from the
 * calibration streams.  Requires reps >= 100 (InvalidParameterError).
 */
[[nodiscard]] Estimate estimate_size(const DetectorSpec & spec,
                                     double lambda0, double scale,
                                     std::uint64_t reps, std::uint64_t seed,
                                     CalibrationEngine & engine,
                                     const RunOptions & options = {});

/// Estimated power under an arbitrary piecewise-constant alternative; same
/// conventions as estimate_size.
[[nodiscard]] Estimate estimate_power(const DetectorSpec & spec,
                                      const IntensityProfile & alternative,
                                      double scale, std::uint64_t reps,
                                      std::uint64_t seed,
                                      CalibrationEngine & engine,
                                      const RunOptions & options = {});

// ============================================================================
// Table reproduction
// ============================================================================

/// Benchmark configuration.  Defaults are the quick desk scale; the
/// paper_scale() preset restores the reference replication counts.
struct BenchConfig {
    std::vector<std::string> table_ids;  ///< empty = every embedded table
    std::uint64_t size_reps = 2000;
    std::uint64_t power_reps = 500;
    std::uint64_t budget = 50000;   ///< Monte-Carlo calibration budget
    std::uint64_t seed = 1;
    double alpha = 0.05;            ///< nominal level of every detector
    double lambda0 = 1.0;           ///< null baseline rate
    double scale = 100.0;           ///< observation scale L
    /// Directory for per-table CSV/JSON files; unset = no files written.
    std::optional<std::filesystem::path> output_dir;

    /// Reference replication scale: 5000 null reps, 1000 alternative reps,
    /// calibration budget 200000.
    [[nodiscard]] static BenchConfig paper_scale();
};

/// One estimated cell with its reference comparison.
struct ResultCell {
    double estimate = 0.0;
    double stderr_value = 0.0;
    std::uint64_t reps = 0;
    double reference = 0.0;      ///< embedded reference value
    std::uint64_t reference_reps = 0;
    double diff = 0.0;           ///< estimate - reference
    bool flagged = false;        ///< |diff| > 3 pooled standard errors
};

/// One table row: a detector label and its cells (one per delta for power
/// tables, a single cell for size tables).
struct ResultRow {
    std::string detector;
    std::vector<ResultCell> cells;
};

/// One reproduced table.
struct ResultTable {
    std::string id;
    std::string caption;
    std::string kind;      ///< "size" or "power"
    std::string scenario;  ///< "jump" / "bump" (power tables)
    double tau = 0.0;
    double ell = 0.0;
    std::vector<double> delta_grid;  ///< empty for size tables
    std::vector<ResultRow> rows;

    [[nodiscard]] std::size_t cell_count() const noexcept;
    [[nodiscard]] std::size_t flagged_count() const noexcept;

    /// Estimate matrix as CSV: header `detector` + the delta grid (power)
    /// or `detector,estimate` (size); fixed 6-significant-digit rendering.
    [[nodiscard]] std::string to_csv() const;

    /// Full account (estimates, standard errors, references, diffs, flags)
    /// as a JSON object.
    [[nodiscard]] std::string to_json() const;
};

/// Outcome of a reproduction run.
struct BenchOutcome {
    std::vector<ResultTable> tables;
    std::size_t cell_count = 0;
    std::size_t flagged_count = 0;
};

/**
 * @brief Reproduces the selected reference tables at the configured
 * replication scale.
 *
 * Per table: simulate the replicate samples, pre-calibrate every critical
 * value the detectors will query (serially over the distinct conditioning
 * totals; the engine parallelizes each pool internally), then evaluate
 * replicates in parallel and assemble rows single-threaded.  When
 * `config.output_dir` is set, writes `<id>.csv` and `<id>.json` per table.
 * `progress`, when non-null, receives one line per completed table.
 *
 * Throws InvalidParameterError for an unknown table id; propagates
 * calibration-layer errors.
 */
[[nodiscard]] BenchOutcome reproduce_tables(const BenchConfig & config,
                                            CalibrationEngine & engine,
                                            std::ostream * progress = nullptr);

/// The deviation rule applied to every cell: |estimate - reference| > 3
/// pooled standard errors, pooling the Monte-Carlo error of both sides
/// (sqrt(p1 q1 / n1 + p2 q2 / n2)).  Exposed for direct testing.
[[nodiscard]] bool deviation_flagged(double estimate, std::uint64_t reps,
                                     double reference,
                                     std::uint64_t reference_reps);

}  // namespace pcd
