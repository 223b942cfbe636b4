/**
 * @file acceptance_main.cpp
 * @brief Release gate: end-to-end statistical acceptance checks.
 *
 * Each criterion prints exactly one `criterion N: PASS/FAIL` line on stdout
 * with a short account of what was measured; progress goes to stderr.  The
 * process exits 0 only when every selected criterion passes.  Criterion
 * numbers may be passed as arguments to run a subset (default: all).
 *
 * The checks, in order:
 *   1. null rejection rates of the reference battery at full replication
 *      scale stay within +-0.012 of the embedded references and below
 *      0.05 + 3 sigma;
 *   2. power anchor cells reproduce within +-0.05 and at most 2% of all
 *      table cells are flagged as deviating;
 *   3. the randomized window tests have exactly the nominal size, verified
 *      by pmf summation to 1e-8;
 *   4. the closed-form mean/variance of the quadratic statistics match
 *      simulation within 4 Monte-Carlo standard errors;
 *   5. discrete quantiles respect the two-sided sandwich and Monte-Carlo
 *      critical values respect their closed-form envelopes;
 *   6. the exact sup evaluators agree with dense-grid brute force;
 *   7. min-p rejections contain the Bonferroni rejections on shared samples,
 *      and conditional-detector sizes do not depend on the baseline rate;
 *   8. the smallest detectable change energy of the full-grid quadratic
 *      detector is nonincreasing in the observation scale.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <pcd/bench.hpp>
#include <pcd/calibration.hpp>
#include <pcd/detectors.hpp>
#include <pcd/errors.hpp>
#include <pcd/event_sample.hpp>
#include <pcd/quantiles.hpp>
#include <pcd/rng.hpp>
#include <pcd/statistics.hpp>

namespace {

// ============================================================================
// Reporting scaffolding
// ============================================================================

struct CriterionResult {
    int index = 0;
    bool pass = false;
    std::string detail;
};

/// Collects failure messages; the criterion passes when none accumulate.
class Failures {
  public:
    void add(const std::string & message) { items_.push_back(message); }

    [[nodiscard]] bool empty() const noexcept { return items_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }

    /// First few messages joined for the one-line report.
    [[nodiscard]] std::string brief() const {
        std::ostringstream out;
        const std::size_t shown = items_.size() < 4 ? items_.size() : 3;
        for (std::size_t i = 0; i < shown; ++i) {
            if (i > 0) {
                out << "; ";
            }
            out << items_[i];
        }
        if (shown < items_.size()) {
            out << "; and " << (items_.size() - shown) << " more";
        }
        return out.str();
    }

  private:
    std::vector<std::string> items_;
};

[[nodiscard]] std::string fmt(double value, int digits = 4) {
    std::ostringstream out;
    out << std::setprecision(digits) << value;
    return out.str();
}

class Stopwatch {
  public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

void progress(const std::string & message) {
    std::cerr << "[acceptance] " << message << "\n" << std::flush;
}

// ============================================================================
// Criteria 1 + 2: full-scale table reproduction
// ============================================================================

struct AnchorCell {
    const char * table_id;
    const char * detector;
    double delta;
    double expected;
};

constexpr AnchorCell kAnchors[] = {
    {"cp_star_0.5", "la", 0.8, 0.84},
    {"cp_star_0.5", "cp1_theta_d", 0.8, 1.0},
    {"cp_star_0.5", "cp2_theta_d", -0.4, 0.73},
    {"tc_star_0.2_0.4", "tc1", 0.8, 0.94},
    {"tc_star_0.2_0.4", "tc2", -0.8, 1.0},
    {"cp_0.5", "cp1u_theta_d", 0.8, 0.77},
    {"cp_0.95", "cp1u_theta_d", 0.2, 0.06},
};

constexpr double kSizeDeviationLimit = 0.012;
constexpr double kSizeAbsoluteLimit = 0.0592;  // 0.05 + 3 sigma at 5000 reps
constexpr double kAnchorTolerance = 0.05;
constexpr std::size_t kFlaggedLimit = 17;  // 2% of the 878 table cells

[[nodiscard]] const pcd::ResultTable & find_table(
    const pcd::BenchOutcome & outcome, const std::string & id) {
    for (const pcd::ResultTable & table : outcome.tables) {
        if (table.id == id) {
            return table;
        }
    }
    throw pcd::InvalidParameterError("reproduced output lacks table " + id);
}

[[nodiscard]] const pcd::ResultRow & find_row(const pcd::ResultTable & table,
                                              const std::string & detector) {
    for (const pcd::ResultRow & row : table.rows) {
        if (row.detector == detector) {
            return row;
        }
    }
    throw pcd::InvalidParameterError("table " + table.id + " lacks row " +
                                     detector);
}

[[nodiscard]] std::size_t delta_index(const pcd::ResultTable & table,
                                      double delta) {
    for (std::size_t i = 0; i < table.delta_grid.size(); ++i) {
        if (std::abs(table.delta_grid[i] - delta) < 1e-12) {
            return i;
        }
    }
    throw pcd::InvalidParameterError("table " + table.id +
                                     " lacks delta column " + fmt(delta));
}

void run_bench_criteria(std::vector<CriterionResult> & results, bool want1,
                        bool want2) {
    Stopwatch watch;
    progress("criteria 1+2: reproducing all tables at full scale "
             "(5000/1000 replications, calibration budget 200000)...");

    pcd::BenchConfig config = pcd::BenchConfig::paper_scale();
    config.seed = 1;
    config.output_dir = std::filesystem::path("acceptance_tables");
    pcd::CalibrationEngine engine;
    const pcd::BenchOutcome outcome =
        pcd::reproduce_tables(config, engine, &std::cerr);
    progress("criteria 1+2: reproduction finished in " +
             fmt(watch.seconds(), 5) + " s");

    if (want1) {
        Failures failures;
        double max_dev = 0.0;
        double max_size = 0.0;
        for (const char * table_id : {"size_known", "size_unknown"}) {
            const pcd::ResultTable & table = find_table(outcome, table_id);
            for (const pcd::ResultRow & row : table.rows) {
                const pcd::ResultCell & cell = row.cells.at(0);
                const double dev = std::abs(cell.diff);
                max_dev = std::max(max_dev, dev);
                max_size = std::max(max_size, cell.estimate);
                if (dev > kSizeDeviationLimit) {
                    failures.add(std::string(table_id) + "/" + row.detector +
                                 ": |" + fmt(cell.estimate) + " - " +
                                 fmt(cell.reference) + "| > " +
                                 fmt(kSizeDeviationLimit));
                }
                if (cell.estimate > kSizeAbsoluteLimit) {
                    failures.add(std::string(table_id) + "/" + row.detector +
                                 ": size " + fmt(cell.estimate) + " > " +
                                 fmt(kSizeAbsoluteLimit));
                }
            }
        }
        CriterionResult result;
        result.index = 1;
        result.pass = failures.empty();
        result.detail =
            result.pass
                ? "14 null rejection rates within +-" +
                      fmt(kSizeDeviationLimit) + " of reference (max |dev| " +
                      fmt(max_dev) + "), max size " + fmt(max_size) +
                      " <= " + fmt(kSizeAbsoluteLimit)
                : failures.brief();
        results.push_back(result);
    }

    if (want2) {
        Failures failures;
        double max_anchor_dev = 0.0;
        for (const AnchorCell & anchor : kAnchors) {
            const pcd::ResultTable & table = find_table(outcome,
                                                        anchor.table_id);
            const pcd::ResultRow & row = find_row(table, anchor.detector);
            const pcd::ResultCell & cell =
                row.cells.at(delta_index(table, anchor.delta));
            const double dev = std::abs(cell.estimate - anchor.expected);
            max_anchor_dev = std::max(max_anchor_dev, dev);
            if (dev > kAnchorTolerance) {
                failures.add(std::string(anchor.table_id) + "/" +
                             anchor.detector + " at delta " +
                             fmt(anchor.delta) + ": |" + fmt(cell.estimate) +
                             " - " + fmt(anchor.expected) + "| > " +
                             fmt(kAnchorTolerance));
            }
        }
        if (outcome.cell_count != 878) {
            failures.add("expected 878 cells, reproduced " +
                         std::to_string(outcome.cell_count));
        }
        if (outcome.flagged_count > kFlaggedLimit) {
            failures.add(std::to_string(outcome.flagged_count) +
                         " flagged cells exceed the limit of " +
                         std::to_string(kFlaggedLimit));
        }
        CriterionResult result;
        result.index = 2;
        result.pass = failures.empty();
        result.detail =
            result.pass
                ? "7 power anchors within +-" + fmt(kAnchorTolerance) +
                      " (max |dev| " + fmt(max_anchor_dev) + "); " +
                      std::to_string(outcome.flagged_count) + "/" +
                      std::to_string(outcome.cell_count) +
                      " cells flagged (limit " +
                      std::to_string(kFlaggedLimit) + ")"
                : failures.brief();
        results.push_back(result);
    }
}

// ============================================================================
// Criterion 3: exact size of the randomized window tests
// ============================================================================

/// Evenly spaced times inside (lo, hi): keeps counts exact and away from
/// window boundaries.
void place_events(std::vector<double> & times, std::uint64_t count, double lo,
                  double hi) {
    for (std::uint64_t i = 0; i < count; ++i) {
        times.push_back(lo + (hi - lo) * static_cast<double>(i + 1) /
                                 static_cast<double>(count + 1));
    }
}

/// E[test] under a Poisson count on the test window, by pmf summation until
/// the accumulated mass exceeds 1 - 1e-12 (the dropped tail is far below the
/// 1e-8 comparison margin).
[[nodiscard]] double known_exact_size(pcd::Family family, double lambda0,
                                      double ell_star, double scale,
                                      pcd::CalibrationEngine & engine) {
    pcd::DetectorSpec spec;
    spec.family = family;
    spec.baseline = pcd::Baseline::known_rate(lambda0);
    spec.alpha = 0.05;
    spec.tau_star = 0.0;
    spec.ell_star = ell_star;

    const double xi = lambda0 * scale * ell_star;
    double total = 0.0;
    double accumulated = 0.0;
    const std::uint64_t cap =
        static_cast<std::uint64_t>(xi + 60.0 * std::sqrt(xi + 1.0) + 200.0);
    for (std::uint64_t c = 0; c <= cap; ++c) {
        const double mass = pcd::poisson_pmf(xi, c);
        std::vector<double> times;
        place_events(times, c, 0.0, ell_star);
        const pcd::EventSample sample(scale, std::move(times));
        const pcd::TestReport report = pcd::run_detector(spec, sample, engine);
        total += mass * report.reject_probability;
        accumulated += mass;
        if (accumulated > 1.0 - 1e-12 && static_cast<double>(c) > xi) {
            break;
        }
    }
    return total;
}

/// Conditional analogue: the inside count is Binomial(n, ell_star) given the
/// total, and the sum over all n + 1 values is exact.
[[nodiscard]] double cond_exact_size(pcd::Family family, double ell_star,
                                     std::uint64_t n,
                                     pcd::CalibrationEngine & engine) {
    pcd::DetectorSpec spec;
    spec.family = family;
    spec.baseline = pcd::Baseline::unknown_bounded(2.0);
    spec.alpha = 0.05;
    spec.tau_star = 0.0;
    spec.ell_star = ell_star;

    double total = 0.0;
    for (std::uint64_t b = 0; b <= n; ++b) {
        const double mass = pcd::binomial_pmf(n, ell_star, b);
        std::vector<double> times;
        place_events(times, b, 0.0, ell_star);
        place_events(times, n - b, ell_star, 1.0);
        std::sort(times.begin(), times.end());
        const pcd::EventSample sample(100.0, std::move(times));
        const pcd::TestReport report = pcd::run_detector(spec, sample, engine);
        total += mass * report.reject_probability;
    }
    return total;
}

[[nodiscard]] CriterionResult run_criterion_3() {
    Stopwatch watch;
    progress("criterion 3: exact-size summation for the randomized tests...");
    constexpr double kMargin = 1e-8;
    constexpr double kAlpha = 0.05;

    pcd::CalibrationEngine engine;
    Failures failures;
    double worst = 0.0;

    struct Triple {
        double lambda0;
        double ell_star;
        double scale;
    };
    const Triple triples[] = {{1.0, 0.4, 100.0},
                              {5.0, 0.1, 50.0},
                              {0.5, 0.9, 30.0}};
    for (const pcd::Family family :
         {pcd::Family::phi1_plus_known, pcd::Family::phi2_lin_known}) {
        for (const Triple & t : triples) {
            const double size = known_exact_size(family, t.lambda0, t.ell_star,
                                                 t.scale, engine);
            const double err = std::abs(size - kAlpha);
            worst = std::max(worst, err);
            if (err > kMargin) {
                failures.add(std::string(pcd::family_id(family)) +
                             " at (lambda0=" + fmt(t.lambda0) +
                             ", ell=" + fmt(t.ell_star) + ", L=" +
                             fmt(t.scale) + "): size " + fmt(size, 12));
            }
        }
    }
    for (const pcd::Family family :
         {pcd::Family::phi1_plus_cond, pcd::Family::phi2_lin_cond}) {
        for (const double ell_star : {0.4, 0.1, 0.9}) {
            for (const std::uint64_t n :
                 {std::uint64_t{1}, std::uint64_t{5}, std::uint64_t{20},
                  std::uint64_t{100}}) {
                const double size =
                    cond_exact_size(family, ell_star, n, engine);
                const double err = std::abs(size - kAlpha);
                worst = std::max(worst, err);
                if (err > kMargin) {
                    failures.add(std::string(pcd::family_id(family)) +
                                 " at (ell=" + fmt(ell_star) + ", n=" +
                                 std::to_string(n) + "): size " +
                                 fmt(size, 12));
                }
            }
        }
    }

    progress("criterion 3: done in " + fmt(watch.seconds(), 5) + " s");
    CriterionResult result;
    result.index = 3;
    result.pass = failures.empty();
    result.detail = result.pass
                        ? "30 exact sizes equal 0.05 to 1e-8 (worst |error| " +
                              fmt(worst, 3) + ")"
                        : failures.brief();
    return result;
}

// ============================================================================
// Criterion 4: moment formulas versus simulation
// ============================================================================

struct MomentSample {
    double mean = 0.0;
    double variance = 0.0;
    double mean_stderr = 0.0;
    double variance_stderr = 0.0;
};

/// Sample mean/variance with self-calibrated standard errors (the variance
/// error bar uses the central fourth moment).
[[nodiscard]] MomentSample summarize(const std::vector<double> & values) {
    const double n = static_cast<double>(values.size());
    long double sum = 0.0L;
    for (const double v : values) {
        sum += v;
    }
    const double mean = static_cast<double>(sum / n);
    long double m2 = 0.0L;
    long double m4 = 0.0L;
    for (const double v : values) {
        const long double d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    MomentSample out;
    out.mean = mean;
    out.variance = static_cast<double>(m2 / n);
    out.mean_stderr = std::sqrt(out.variance / n);
    const double var_of_var =
        static_cast<double>(m4 / n) - out.variance * out.variance;
    out.variance_stderr = std::sqrt(std::max(var_of_var, 0.0) / n);
    return out;
}

struct QuadCase {
    std::string label;
    pcd::IntensityProfile profile;
    bool conditional;
    double tau1;
    double tau2;
    double lambda0;  // known-baseline centering (ignored conditionally)
    double scale;
};

[[nodiscard]] CriterionResult run_criterion_4() {
    Stopwatch watch;
    progress("criterion 4: simulating 10 x 100000 quadratic statistics...");
    constexpr std::uint64_t kReps = 100000;
    constexpr double kBand = 4.0;

    std::vector<QuadCase> cases;
    // Known-baseline statistic: two null and three alternative designs.
    cases.push_back({"T null (1,100)", pcd::IntensityProfile::constant(1.0),
                     false, 0.2, 0.7, 1.0, 100.0});
    cases.push_back({"T null (5,50)", pcd::IntensityProfile::constant(5.0),
                     false, 0.1, 0.3, 5.0, 50.0});
    cases.push_back({"T bump +0.4",
                     pcd::IntensityProfile::bump(1.0, 0.4, 0.2, 0.5), false,
                     0.2, 0.7, 1.0, 100.0});
    cases.push_back({"T bump +1.5",
                     pcd::IntensityProfile::bump(0.5, 1.5, 0.5, 0.4), false,
                     0.5, 0.9, 0.5, 30.0});
    cases.push_back({"T bump -0.6",
                     pcd::IntensityProfile::bump(1.0, -0.6, 0.3, 0.2), false,
                     0.3, 0.5, 1.0, 100.0});
    // Conditional statistic: two null and three alternative designs.
    cases.push_back({"T' null (1,60)", pcd::IntensityProfile::constant(1.0),
                     true, 0.25, 0.75, 1.0, 60.0});
    cases.push_back({"T' null (5,50)", pcd::IntensityProfile::constant(5.0),
                     true, 0.1, 0.3, 5.0, 50.0});
    cases.push_back({"T' bump +0.6",
                     pcd::IntensityProfile::bump(1.0, 0.6, 0.25, 0.5), true,
                     0.25, 0.75, 1.0, 60.0});
    cases.push_back({"T' jump +0.8", pcd::IntensityProfile::jump(1.0, 0.8, 0.5),
                     true, 0.5, 0.9, 1.0, 100.0});
    cases.push_back({"T' bump +1.5",
                     pcd::IntensityProfile::bump(0.5, 1.5, 0.5, 0.4), true,
                     0.5, 0.9, 0.5, 30.0});

    pcd::Rng rng(40411);
    Failures failures;
    double worst_sigma = 0.0;
    for (std::size_t index = 0; index < cases.size(); ++index) {
        const QuadCase & c = cases[index];
        auto stream = rng.substream("moments", static_cast<std::uint64_t>(index));
        std::vector<double> values;
        values.reserve(kReps);
        for (std::uint64_t rep = 0; rep < kReps; ++rep) {
            const pcd::EventSample sample =
                pcd::simulate(stream, c.profile, c.scale);
            values.push_back(
                c.conditional
                    ? pcd::quad_stat_cond(sample, c.tau1, c.tau2)
                    : pcd::quad_stat_known(sample, c.tau1, c.tau2, c.lambda0));
        }
        const MomentSample observed = summarize(values);

        pcd::Moments expected;
        if (c.conditional) {
            expected = pcd::moments_quad_cond(
                c.profile.mass(0.0, c.tau1), c.profile.mass(c.tau1, c.tau2),
                c.profile.mass(c.tau2, 1.0), c.tau1, c.tau2, c.scale);
        } else {
            expected = pcd::moments_quad(c.profile.mass(c.tau1, c.tau2),
                                         c.tau1, c.tau2, c.lambda0, c.scale);
        }

        const double mean_sigma =
            std::abs(observed.mean - expected.mean) / observed.mean_stderr;
        const double var_sigma = std::abs(observed.variance -
                                          expected.variance) /
                                 observed.variance_stderr;
        worst_sigma = std::max({worst_sigma, mean_sigma, var_sigma});
        if (mean_sigma > kBand) {
            failures.add(c.label + ": mean " + fmt(observed.mean) + " vs " +
                         fmt(expected.mean) + " (" + fmt(mean_sigma, 3) +
                         " sigma)");
        }
        if (var_sigma > kBand) {
            failures.add(c.label + ": variance " + fmt(observed.variance) +
                         " vs " + fmt(expected.variance) + " (" +
                         fmt(var_sigma, 3) + " sigma)");
        }
    }

    progress("criterion 4: done in " + fmt(watch.seconds(), 5) + " s");
    CriterionResult result;
    result.index = 4;
    result.pass = failures.empty();
    result.detail =
        result.pass
            ? "10 mean/variance pairs within 4 MC stderr (worst " +
                  fmt(worst_sigma, 3) + " sigma over 100000 replicates each)"
            : failures.brief();
    return result;
}

// ============================================================================
// Criterion 5: quantile sandwich and closed-form envelopes
// ============================================================================

[[nodiscard]] CriterionResult run_criterion_5() {
    Stopwatch watch;
    progress("criterion 5: quantile sandwich grid and 20 Monte-Carlo "
             "envelope checks at budget 200000...");
    Failures failures;

    // 20 x 10 grid of (xi, u): means log-spaced over six decades.
    const double levels[] = {0.01, 0.05, 0.2,  0.35, 0.5,
                             0.65, 0.8,  0.9,  0.95, 0.99};
    std::size_t grid_points = 0;
    for (int j = 0; j < 20; ++j) {
        const double xi = 0.1 * std::pow(10.0, 6.0 * j / 19.0);
        for (const double u : levels) {
            const auto quantile = pcd::poisson_quantile(xi, u);
            const auto sandwich = pcd::poisson_quantile_sandwich(xi, u);
            const double value = static_cast<double>(quantile.value);
            ++grid_points;
            if (value < sandwich.lower - 1e-9 ||
                value > sandwich.upper + 1e-9) {
                failures.add("sandwich violated at xi=" + fmt(xi) +
                             ", u=" + fmt(u) + ": " + fmt(value) +
                             " outside [" + fmt(sandwich.lower) + ", " +
                             fmt(sandwich.upper) + "]");
            }
        }
    }

    pcd::CalibrationEngine engine;
    pcd::CalibrationOptions options;
    options.budget = 200000;

    struct KnownCase {
        pcd::WindowStatKind kind;
        double lambda0;
        double scale;
        double tau1;
        double tau2;
        double u;
    };
    const KnownCase known_cases[] = {
        {pcd::WindowStatKind::quad, 1.0, 100.0, 0.0, 0.5, 0.95},
        {pcd::WindowStatKind::quad, 1.0, 100.0, 0.2, 0.6, 0.99},
        {pcd::WindowStatKind::quad, 5.0, 50.0, 0.0, 0.1, 0.95},
        {pcd::WindowStatKind::quad, 5.0, 50.0, 0.3, 0.9, 0.975},
        {pcd::WindowStatKind::quad, 0.5, 30.0, 0.0, 0.9, 0.95},
        {pcd::WindowStatKind::quad, 2.0, 100.0, 0.1, 0.2, 0.99},
        {pcd::WindowStatKind::quad, 1.0, 50.0, 0.25, 0.75, 0.9},
        {pcd::WindowStatKind::quad, 3.0, 80.0, 0.5, 1.0, 0.95},
        {pcd::WindowStatKind::abs_lin, 1.0, 100.0, 0.0, 0.5, 0.95},
        {pcd::WindowStatKind::abs_lin, 1.0, 100.0, 0.2, 0.6, 0.99},
        {pcd::WindowStatKind::abs_lin, 5.0, 50.0, 0.0, 0.1, 0.975},
        {pcd::WindowStatKind::abs_lin, 0.5, 30.0, 0.1, 0.8, 0.95},
        {pcd::WindowStatKind::abs_lin, 2.0, 100.0, 0.4, 0.9, 0.9},
        {pcd::WindowStatKind::abs_lin, 3.0, 80.0, 0.5, 1.0, 0.99},
    };
    std::uint64_t seed = 5001;
    std::size_t mc_checks = 0;
    for (const KnownCase & c : known_cases) {
        options.seed = seed++;
        const pcd::Regime regime = pcd::Regime::known(c.lambda0, c.scale);
        const double quantile = engine.window_stat_quantile(
            c.tau1, c.tau2, c.kind, regime, c.u, options);
        const double rho = c.tau2 - c.tau1;
        const double tail = 1.0 - c.u;
        const double bound =
            c.kind == pcd::WindowStatKind::quad
                ? pcd::quad_stat_quantile_bound(c.lambda0, c.scale, rho, tail)
                : pcd::abs_lin_stat_quantile_bound(c.lambda0, c.scale, rho,
                                                   tail);
        ++mc_checks;
        if (quantile > bound + 1e-12) {
            failures.add(std::string(c.kind == pcd::WindowStatKind::quad
                                         ? "quad"
                                         : "abs") +
                         " quantile at (lambda0=" + fmt(c.lambda0) + ", L=" +
                         fmt(c.scale) + ", rho=" + fmt(rho) + ", u=" +
                         fmt(c.u) + "): " + fmt(quantile) + " > bound " +
                         fmt(bound));
        }
    }

    struct CondCase {
        std::uint64_t n;
        double scale;
        double tau1;
        double tau2;
        double u;
    };
    const CondCase cond_cases[] = {
        {20, 100.0, 0.0, 0.5, 0.95},  {100, 100.0, 0.2, 0.6, 0.99},
        {50, 50.0, 0.0, 0.25, 0.95},  {200, 100.0, 0.5, 0.9, 0.975},
        {5, 30.0, 0.1, 0.7, 0.9},     {1000, 400.0, 0.25, 0.75, 0.95},
    };
    for (const CondCase & c : cond_cases) {
        options.seed = seed++;
        const pcd::Regime regime = pcd::Regime::given_total(c.n, c.scale);
        const double quantile = engine.window_stat_quantile(
            c.tau1, c.tau2, pcd::WindowStatKind::abs_lin, regime, c.u,
            options);
        const double rho = c.tau2 - c.tau1;
        const double bound =
            pcd::cond_abs_lin_stat_quantile_bound(c.n, rho, 1.0 - c.u);
        ++mc_checks;
        if (quantile > bound + 1e-12) {
            failures.add("conditional quantile at (n=" + std::to_string(c.n) +
                         ", rho=" + fmt(rho) + ", u=" + fmt(c.u) + "): " +
                         fmt(quantile) + " > bound " + fmt(bound));
        }
    }

    progress("criterion 5: done in " + fmt(watch.seconds(), 5) + " s");
    CriterionResult result;
    result.index = 5;
    result.pass = failures.empty();
    result.detail = result.pass
                        ? std::to_string(grid_points) +
                              " sandwich points hold; " +
                              std::to_string(mc_checks) +
                              " Monte-Carlo quantiles below their "
                              "closed-form envelopes"
                        : failures.brief();
    return result;
}

// ============================================================================
// Criterion 6: exact sup evaluators versus dense grids
// ============================================================================

constexpr double kGridStep = 1e-5;
constexpr double kScanLength = 0.3;
constexpr double kTauStar = 0.2;

/// Generic-position predicate: events keep clear of the interval ends, of
/// each other, of their own ell-shifts (window-extremum change points) and
/// of the scan anchor, so a 1e-5 grid resolves every count transition.
[[nodiscard]] bool well_separated(const std::vector<double> & times) {
    constexpr double kGap = 1e-4;
    if (times.empty()) {
        return true;
    }
    if (times.front() <= kGap || times.back() >= 1.0 - kGap) {
        return false;
    }
    std::vector<double> change_points;
    change_points.reserve(2 * times.size());
    for (const double t : times) {
        if (std::abs(t - kTauStar) <= kGap) {
            return false;
        }
        change_points.push_back(t);
        if (t - kScanLength > 0.0) {
            change_points.push_back(t - kScanLength);
        }
    }
    std::sort(change_points.begin(), change_points.end());
    for (std::size_t i = 1; i < change_points.size(); ++i) {
        if (change_points[i] - change_points[i - 1] <= kGap) {
            return false;
        }
    }
    return true;
}

/// Count in (tau, tau + ell] swept over the tau grid; returns {max, min}.
struct ExtremaBrute {
    std::uint64_t max_count = 0;
    std::uint64_t min_count = 0;
};
[[nodiscard]] ExtremaBrute brute_extrema(const std::vector<double> & times,
                                         double ell) {
    const std::size_t steps =
        static_cast<std::size_t>(std::llround((1.0 - ell) / kGridStep)) + 1;
    std::size_t lo = 0;  // first index with time > tau
    std::size_t hi = 0;  // first index with time > tau + ell
    ExtremaBrute out;
    out.min_count = times.size();
    for (std::size_t k = 0; k < steps; ++k) {
        const double tau = std::min(static_cast<double>(k) * kGridStep,
                                    1.0 - ell);
        while (lo < times.size() && times[lo] <= tau) {
            ++lo;
        }
        while (hi < times.size() && times[hi] <= tau + ell) {
            ++hi;
        }
        const std::uint64_t count = hi - lo;
        out.max_count = std::max(out.max_count, count);
        out.min_count = std::min(out.min_count, count);
    }
    return out;
}

/// Dense sweep of the shifted statistic over ell on (0, 1 - tau_star].
[[nodiscard]] double brute_sup_length(const std::vector<double> & times,
                                      double delta_star, bool known,
                                      double lambda0, double scale,
                                      double total) {
    const double sign = delta_star > 0.0 ? 1.0 : -1.0;
    const double height = std::abs(delta_star);
    const double span = 1.0 - kTauStar;
    const std::size_t steps =
        static_cast<std::size_t>(std::floor(span / kGridStep));
    std::size_t hi = 0;
    while (hi < times.size() && times[hi] <= kTauStar) {
        ++hi;
    }
    const std::size_t base = hi;
    double best = 0.0;  // the ell -> 0+ limit of both variants
    for (std::size_t k = 1; k <= steps; ++k) {
        const double ell = std::min(static_cast<double>(k) * kGridStep, span);
        while (hi < times.size() && times[hi] <= kTauStar + ell) {
            ++hi;
        }
        const double count = static_cast<double>(hi - base);
        const double stat =
            known ? sign * (count - lambda0 * scale * ell) -
                        height * scale * ell / 2.0
                  : sign * (count - ell * total) -
                        height * scale * ell * (1.0 - ell) / 2.0;
        best = std::max(best, stat);
    }
    return best;
}

/// Dense sweep of the shifted statistic over tau on [0, 1) for the
/// right-anchored window (tau, 1].
[[nodiscard]] double brute_sup_location(const std::vector<double> & times,
                                        double delta_star, bool known,
                                        double lambda0, double scale,
                                        double total) {
    const double sign = delta_star > 0.0 ? 1.0 : -1.0;
    const double height = std::abs(delta_star);
    const std::size_t steps =
        static_cast<std::size_t>(std::floor(1.0 / kGridStep));
    std::size_t lo = 0;  // first index with time > tau
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < steps; ++k) {
        const double tau = static_cast<double>(k) * kGridStep;
        while (lo < times.size() && times[lo] <= tau) {
            ++lo;
        }
        const double rho = 1.0 - tau;
        const double count = static_cast<double>(times.size() - lo);
        const double stat =
            known ? sign * (count - lambda0 * scale * rho) -
                        height * scale * rho / 2.0
                  : sign * (count - rho * total) -
                        height * scale * rho * (1.0 - rho) / 2.0;
        best = std::max(best, stat);
    }
    return best;
}

[[nodiscard]] CriterionResult run_criterion_6() {
    Stopwatch watch;
    progress("criterion 6: sup evaluators vs dense grids on 1000 samples...");
    constexpr double kLambda0 = 1.0;
    constexpr double kScale = 30.0;

    pcd::Rng rng(60601);
    auto stream = rng.substream("sup-oracle");
    const pcd::IntensityProfile profiles[] = {
        pcd::IntensityProfile::constant(1.0),
        pcd::IntensityProfile::bump(1.0, 2.0, 0.3, 0.2),
        pcd::IntensityProfile::jump(1.0, 1.5, 0.5),
    };

    Failures failures;
    std::size_t accepted = 0;
    std::size_t draws = 0;
    while (accepted < 1000 && draws < 100000) {
        const pcd::EventSample sample =
            pcd::simulate(stream, profiles[draws % 3], kScale);
        ++draws;
        const std::vector<double> & times = sample.times();
        if (!well_separated(times)) {
            continue;
        }
        ++accepted;
        const double delta_star = (accepted % 2 == 0) ? 0.7 : -0.7;
        const double total = static_cast<double>(times.size());
        const double slope =
            total + kScale * (kLambda0 + std::abs(delta_star));
        const double tol = slope * kGridStep + 1e-9;
        const std::string tag = "sample " + std::to_string(accepted);

        // Window count extrema: integer equality.
        const ExtremaBrute extrema = brute_extrema(times, kScanLength);
        const pcd::WindowExtremum max_exact =
            pcd::window_max_count(sample, kScanLength);
        const pcd::WindowExtremum min_exact =
            pcd::window_min_count(sample, kScanLength);
        if (max_exact.count != extrema.max_count) {
            failures.add(tag + ": scan max " +
                         std::to_string(max_exact.count) + " != grid " +
                         std::to_string(extrema.max_count));
        }
        if (min_exact.count != extrema.min_count) {
            failures.add(tag + ": scan min " +
                         std::to_string(min_exact.count) + " != grid " +
                         std::to_string(extrema.min_count));
        }

        // Sup over the window length, both centerings.
        for (const bool known : {true, false}) {
            const pcd::SupResult exact = pcd::sup_shifted_over_length(
                sample, kTauStar, delta_star, known, kLambda0);
            const double brute = brute_sup_length(times, delta_star, known,
                                                  kLambda0, kScale, total);
            if (exact.value < brute - 1e-9 || exact.value - brute > tol) {
                failures.add(tag + (known ? ": known" : ": conditional") +
                             " length sup " + fmt(exact.value, 10) +
                             " vs grid " + fmt(brute, 10));
            }
        }

        // Sup over the window start, both centerings.
        for (const bool known : {true, false}) {
            const pcd::SupResult exact = pcd::sup_shifted_over_location(
                sample, delta_star, known, kLambda0);
            const double brute = brute_sup_location(times, delta_star, known,
                                                    kLambda0, kScale, total);
            if (exact.value < brute - 1e-9 || exact.value - brute > tol) {
                failures.add(tag + (known ? ": known" : ": conditional") +
                             " location sup " + fmt(exact.value, 10) +
                             " vs grid " + fmt(brute, 10));
            }
        }
    }
    if (accepted < 1000) {
        failures.add("only " + std::to_string(accepted) +
                     " separated samples in " + std::to_string(draws) +
                     " draws");
    }

    const double elapsed = watch.seconds();
    if (elapsed >= 60.0) {
        failures.add("runtime " + fmt(elapsed, 4) + " s exceeds 60 s");
    }
    progress("criterion 6: done in " + fmt(elapsed, 5) + " s");
    CriterionResult result;
    result.index = 6;
    result.pass = failures.empty();
    result.detail =
        result.pass
            ? "1000 samples, 6 evaluators each, all within one grid step (" +
                  fmt(elapsed, 3) + " s)"
            : failures.brief();
    return result;
}

// ============================================================================
// Criterion 7: min-p dominance and baseline invariance
// ============================================================================

/// Representative parameters per family, inferred from the identifier.
[[nodiscard]] pcd::DetectorSpec representative_spec(pcd::Family family) {
    pcd::DetectorSpec spec;
    spec.family = family;
    spec.baseline = pcd::family_is_conditional(family)
                        ? pcd::Baseline::unknown_bounded(2.0)
                        : pcd::Baseline::known_rate(1.0);
    spec.alpha = 0.05;
    spec.budget = 20000;
    spec.seed = 1;
    const std::string id = pcd::family_id(family);
    const bool window_pair =
        id.rfind("phi1", 0) == 0 || id.rfind("phi2", 0) == 0;
    const bool scan_length =
        id.rfind("phi3", 0) == 0 || id.rfind("phi4", 0) == 0;
    if (window_pair) {
        spec.tau_star = 0.2;
        spec.ell_star = 0.4;
    } else if (scan_length) {
        spec.ell_star = 0.4;
    } else if (id.rfind("phi5", 0) == 0) {
        spec.tau_star = 0.2;
        spec.delta_star = 0.5;
    } else if (id.rfind("phi6", 0) == 0) {
        spec.tau_star = 0.2;
    } else if (id.rfind("phi7", 0) == 0) {
        spec.delta_star = -0.5;
    }
    return spec;
}

[[nodiscard]] CriterionResult run_criterion_7() {
    Stopwatch watch;
    constexpr std::size_t kSharedSamples = 5000;
    progress("criterion 7: min-p dominance on 5000 shared samples across "
             "every family...");

    pcd::CalibrationEngine engine;
    pcd::Rng rng(70707);
    auto stream = rng.substream("dominance-samples");
    std::vector<pcd::EventSample> samples;
    samples.reserve(kSharedSamples);
    const pcd::IntensityProfile null_profile =
        pcd::IntensityProfile::constant(1.0);
    for (std::size_t i = 0; i < kSharedSamples; ++i) {
        samples.push_back(pcd::simulate(stream, null_profile, 100.0));
    }

    Failures failures;
    const auto & families = pcd::all_families();
    for (std::size_t f = 0; f < families.size(); ++f) {
        pcd::DetectorSpec bonf = representative_spec(families[f]);
        bonf.correction = pcd::Correction::bonferroni;
        pcd::DetectorSpec minp = bonf;
        minp.correction = pcd::Correction::min_p;
        std::size_t violations = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const std::uint64_t aux =
                pcd::mix64(1000003 * (f + 1) + i);
            bonf.aux_seed = aux;
            minp.aux_seed = aux;
            const pcd::TestReport report_b =
                pcd::run_detector(bonf, samples[i], engine);
            const pcd::TestReport report_m =
                pcd::run_detector(minp, samples[i], engine);
            if (report_b.decision == pcd::Decision::reject &&
                report_m.decision != pcd::Decision::reject) {
                ++violations;
            }
        }
        if (violations > 0) {
            failures.add(std::string(pcd::family_id(families[f])) + ": " +
                         std::to_string(violations) +
                         " Bonferroni rejections not covered by min-p");
        }
        progress("criterion 7: dominance checked for " +
                 std::string(pcd::family_id(families[f])));
    }

    progress("criterion 7: conditional sizes across baseline rates...");
    const char * labels[] = {"cp1u_theta_d", "cp2u_theta_d", "cp1u_theta_r",
                             "cp2u_theta_r", "tc1u", "tc2u"};
    const double rates[] = {0.2, 1.0, 5.0};
    double worst_gap_sigma = 0.0;
    for (const char * label : labels) {
        pcd::Estimate estimates[3];
        for (std::size_t j = 0; j < 3; ++j) {
            const pcd::DetectorSpec spec =
                pcd::detector_for_label(label, rates[j], 0.05, 20000, 1);
            estimates[j] = pcd::estimate_size(spec, rates[j], 100.0, 1000,
                                              7171, engine);
        }
        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = a + 1; b < 3; ++b) {
                const double gap =
                    std::abs(estimates[a].value - estimates[b].value);
                const double pooled = std::sqrt(
                    estimates[a].stderr_value * estimates[a].stderr_value +
                    estimates[b].stderr_value * estimates[b].stderr_value);
                const double sigma = pooled > 0.0 ? gap / pooled : 0.0;
                worst_gap_sigma = std::max(worst_gap_sigma, sigma);
                if (gap > 3.0 * pooled) {
                    failures.add(std::string(label) + ": size " +
                                 fmt(estimates[a].value) + " at rate " +
                                 fmt(rates[a]) + " vs " +
                                 fmt(estimates[b].value) + " at rate " +
                                 fmt(rates[b]) + " (" + fmt(sigma, 3) +
                                 " pooled stderr)");
                }
            }
        }
        progress("criterion 7: invariance checked for " + std::string(label));
    }

    progress("criterion 7: done in " + fmt(watch.seconds(), 5) + " s");
    CriterionResult result;
    result.index = 7;
    result.pass = failures.empty();
    result.detail =
        result.pass
            ? "dominance held for 34 families x 5000 samples; conditional "
              "sizes across rates {0.2, 1, 5} within 3 pooled stderr (worst " +
                  fmt(worst_gap_sigma, 3) + ")"
            : failures.brief();
    return result;
}

// ============================================================================
// Criterion 8: detectable change energy versus observation scale
// ============================================================================

[[nodiscard]] CriterionResult run_criterion_8() {
    Stopwatch watch;
    progress("criterion 8: minimal detectable change energy over "
             "L in {50, 100, 200, 400}...");
    constexpr double kTau = 0.2;
    constexpr double kEll = 0.4;
    constexpr std::uint64_t kReps = 500;

    pcd::CalibrationEngine engine;
    Failures failures;
    const double scales[] = {50.0, 100.0, 200.0, 400.0};
    std::vector<double> energies;
    for (const double scale : scales) {
        pcd::DetectorSpec spec;
        spec.family = pcd::Family::phi9_10_quad_known;
        spec.baseline = pcd::Baseline::known_rate(1.0);
        spec.alpha = 0.05;
        spec.correction = pcd::Correction::min_p;
        spec.budget = 20000;
        spec.seed = 1;
        const std::uint64_t seed =
            9000 + static_cast<std::uint64_t>(scale);

        const auto power_at = [&](double delta) {
            const pcd::IntensityProfile profile =
                pcd::IntensityProfile::bump(1.0, delta, kTau, kEll);
            return pcd::estimate_power(spec, profile, scale, kReps, seed,
                                       engine)
                .value;
        };

        double lo = 0.05;
        double hi = 2.0;
        const double power_lo = power_at(lo);
        const double power_hi = power_at(hi);
        if (power_lo >= 0.5 || power_hi < 0.5) {
            failures.add("L=" + fmt(scale) + ": bracket invalid (power " +
                         fmt(power_lo) + " at " + fmt(lo) + ", " +
                         fmt(power_hi) + " at " + fmt(hi) + ")");
            continue;
        }
        for (int iteration = 0; iteration < 8; ++iteration) {
            const double mid = 0.5 * (lo + hi);
            if (power_at(mid) >= 0.5) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        const double delta_half = 0.5 * (lo + hi);
        const double energy = pcd::d2_distance(delta_half, kEll, true);
        energies.push_back(energy);
        progress("criterion 8: L=" + fmt(scale) + " -> delta " +
                 fmt(delta_half) + ", energy " + fmt(energy));
    }
    for (std::size_t i = 1; i < energies.size(); ++i) {
        if (energies[i] > energies[i - 1]) {
            failures.add("energy rises from " + fmt(energies[i - 1]) +
                         " (L=" + fmt(scales[i - 1]) + ") to " +
                         fmt(energies[i]) + " (L=" + fmt(scales[i]) + ")");
        }
    }

    progress("criterion 8: done in " + fmt(watch.seconds(), 5) + " s");
    std::ostringstream sequence;
    for (std::size_t i = 0; i < energies.size(); ++i) {
        if (i > 0) {
            sequence << " >= ";
        }
        sequence << fmt(energies[i]);
    }
    CriterionResult result;
    result.index = 8;
    result.pass = failures.empty();
    result.detail = result.pass ? "detectable energy at power 0.5: " +
                                      sequence.str() +
                                      " over L in {50, 100, 200, 400}"
                                : failures.brief();
    return result;
}

}  // namespace

// ============================================================================
// Entry point
// ============================================================================

int main(int argc, char ** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        try {
            selected.insert(std::stoi(argv[i]));
        } catch (const std::exception &) {
            std::cerr << "usage: " << argv[0] << " [criterion numbers]\n";
            return 2;
        }
    }
    const auto wanted = [&selected](int index) {
        return selected.empty() || selected.count(index) > 0;
    };

    Stopwatch total;
    std::vector<CriterionResult> results;
    const auto guarded = [&results](int index, auto && runner) {
        try {
            results.push_back(runner());
        } catch (const std::exception & e) {
            CriterionResult result;
            result.index = index;
            result.pass = false;
            result.detail = std::string("exception: ") + e.what();
            results.push_back(result);
        }
    };

    if (wanted(3)) {
        guarded(3, run_criterion_3);
    }
    if (wanted(4)) {
        guarded(4, run_criterion_4);
    }
    if (wanted(5)) {
        guarded(5, run_criterion_5);
    }
    if (wanted(6)) {
        guarded(6, run_criterion_6);
    }
    if (wanted(7)) {
        guarded(7, run_criterion_7);
    }
    if (wanted(8)) {
        guarded(8, run_criterion_8);
    }
    if (wanted(1) || wanted(2)) {
        try {
            run_bench_criteria(results, wanted(1), wanted(2));
        } catch (const std::exception & e) {
            for (const int index : {1, 2}) {
                if (wanted(index)) {
                    CriterionResult result;
                    result.index = index;
                    result.pass = false;
                    result.detail = std::string("exception: ") + e.what();
                    results.push_back(result);
                }
            }
        }
    }

    std::sort(results.begin(), results.end(),
              [](const CriterionResult & a, const CriterionResult & b) {
                  return a.index < b.index;
              });
    bool all_pass = true;
    for (const CriterionResult & result : results) {
        all_pass = all_pass && result.pass;
        std::cout << "criterion " << result.index << ": "
                  << (result.pass ? "PASS" : "FAIL") << " - " << result.detail
                  << "\n";
    }
    std::cout << (all_pass ? "acceptance: PASS" : "acceptance: FAIL") << " ("
              << results.size() << " criteria, " << fmt(total.seconds(), 5)
              << " s)\n";
    return all_pass ? 0 : 1;
}
