/**
 * @file detectors.cpp
 * @brief Detector catalogue: specification validation, per-family dispatch,
 * randomized two-sided splits and report serialization.
 */

#include "pcd/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcd/errors.hpp"
#include "pcd/quantiles.hpp"
#include "pcd/rng.hpp"
#include "pcd/statistics.hpp"

namespace pcd {

namespace {

// ============================================================================
// Family table
// ============================================================================

/// Which optional parameters a family consumes, and its regime half.
struct FamilyTraits {
    const char * id;
    bool conditional;   ///< conditions on the total count
    bool needs_tau;     ///< requires tau_star
    bool needs_ell;     ///< requires ell_star
    bool needs_delta;   ///< requires delta_star
    bool allows_grid;   ///< accepts a location_grid preset
    bool window_pair;   ///< tau_star + ell_star describe one window in (0, 1]
};

constexpr FamilyTraits kFamilyTraits[] = {
    // id                     cond   tau    ell    delta  grid   pair
    {"phi1_minus_known",      false, true,  true,  false, false, true},
    {"phi1_plus_known",       false, true,  true,  false, false, true},
    {"phi2_lin_known",        false, true,  true,  false, false, true},
    {"phi2_quad_known",       false, true,  true,  false, false, true},
    {"phi3_lin_minus_known",  false, false, true,  false, false, false},
    {"phi3_lin_plus_known",   false, false, true,  false, false, false},
    {"phi4_lin_known",        false, false, true,  false, false, false},
    {"phi3_4_quad_known",     false, false, true,  false, false, false},
    {"phi5_known",            false, true,  false, true,  false, false},
    {"phi6_lin_known",        false, true,  false, false, false, false},
    {"phi6_quad_known",       false, true,  false, false, false, false},
    {"phi7_known",            false, false, false, true,  false, false},
    {"phi8_lin_known",        false, false, false, false, true,  false},
    {"phi8_quad_known",       false, false, false, false, true,  false},
    {"phi9_10_lin_known",     false, false, false, false, false, false},
    {"phi9_10_quad_known",    false, false, false, false, false, false},
    {"phi1_minus_cond",       true,  true,  true,  false, false, true},
    {"phi1_plus_cond",        true,  true,  true,  false, false, true},
    {"phi2_lin_cond",         true,  true,  true,  false, false, true},
    {"phi2_quad_cond",        true,  true,  true,  false, false, true},
    {"phi3_lin_minus_cond",   true,  false, true,  false, false, false},
    {"phi3_lin_plus_cond",    true,  false, true,  false, false, false},
    {"phi4_lin_cond",         true,  false, true,  false, false, false},
    {"phi3_4_quad_cond",      true,  false, true,  false, false, false},
    {"phi5_cond",             true,  true,  false, true,  false, false},
    {"phi6_lin_cond",         true,  true,  false, false, false, false},
    {"phi6_quad_cond",        true,  true,  false, false, false, false},
    {"phi7_cond",             true,  false, false, true,  false, false},
    {"phi8_lin_cond",         true,  false, false, false, true,  false},
    {"phi8_quad_cond",        true,  false, false, false, true,  false},
    {"phi9_10_lin_cond",      true,  false, false, false, false, false},
    {"phi9_10_quad_cond",     true,  false, false, false, false, false},
    {"laplace",               true,  false, false, false, false, false},
    {"z_test",                true,  false, false, false, false, false},
};

constexpr std::size_t kFamilyCount =
    sizeof(kFamilyTraits) / sizeof(kFamilyTraits[0]);

[[nodiscard]] const FamilyTraits & traits(Family family) {
    const auto index = static_cast<std::size_t>(family);
    return kFamilyTraits[index];
}

/// The uniformity references accept either baseline declaration; everything
/// else must match its regime half.
[[nodiscard]] bool baseline_agnostic(Family family) {
    return family == Family::laplace || family == Family::z_test;
}

// ============================================================================
// Spec validation
// ============================================================================

void require_present(const std::optional<double> & value, bool needed,
                     const char * name, const char * id) {
    if (needed && !value.has_value()) {
        throw InvalidParameterError(std::string("family ") + id +
                                    " requires " + name);
    }
    if (!needed && value.has_value()) {
        throw InvalidParameterError(std::string("family ") + id +
                                    " does not take " + name);
    }
}

void validate_spec(const DetectorSpec & spec) {
    const FamilyTraits & t = traits(spec.family);
    if (!(spec.alpha > 0.0) || !(spec.alpha < 1.0) ||
        !std::isfinite(spec.alpha)) {
        throw InvalidParameterError("level alpha must lie in (0, 1), got " +
                                    std::to_string(spec.alpha));
    }
    if (!baseline_agnostic(spec.family) &&
        spec.baseline.known == t.conditional) {
        throw InvalidParameterError(
            std::string("family ") + t.id +
            (t.conditional
                 ? " conditions on the total count and requires an "
                   "unknown-bounded baseline declaration"
                 : " requires a known-baseline declaration"));
    }
    if (spec.baseline.known) {
        if (!(spec.baseline.lambda0 > 0.0) ||
            !std::isfinite(spec.baseline.lambda0)) {
            throw InvalidParameterError(
                "known baseline rate must be positive and finite");
        }
    } else if (!(spec.baseline.bound > 0.0) ||
               !std::isfinite(spec.baseline.bound)) {
        throw InvalidParameterError(
            "baseline bound must be positive and finite");
    }
    require_present(spec.tau_star, t.needs_tau, "tau_star", t.id);
    require_present(spec.ell_star, t.needs_ell, "ell_star", t.id);
    require_present(spec.delta_star, t.needs_delta, "delta_star", t.id);
    if (spec.location_grid.has_value() && !t.allows_grid) {
        throw InvalidParameterError(std::string("family ") + t.id +
                                    " does not take location_grid");
    }
    if (spec.tau_star.has_value()) {
        const double tau = *spec.tau_star;
        if (!std::isfinite(tau) || tau < 0.0 || tau >= 1.0) {
            throw InvalidParameterError("tau_star must lie in [0, 1), got " +
                                        std::to_string(tau));
        }
    }
    if (spec.ell_star.has_value()) {
        const double ell = *spec.ell_star;
        if (!std::isfinite(ell) || ell <= 0.0) {
            throw InvalidParameterError("ell_star must be positive, got " +
                                        std::to_string(ell));
        }
        if (t.window_pair) {
            if (*spec.tau_star + ell > 1.0) {
                throw InvalidParameterError(
                    "the window (tau_star, tau_star + ell_star] must sit "
                    "inside (0, 1]: tau_star + ell_star exceeds 1");
            }
        } else if (ell >= 1.0) {
            throw InvalidParameterError(
                "the scanned length ell_star must lie in (0, 1), got " +
                std::to_string(ell));
        }
    }
    if (spec.delta_star.has_value()) {
        const double delta = *spec.delta_star;
        if (!std::isfinite(delta) || delta == 0.0) {
            throw InvalidParameterError(
                "delta_star must be nonzero and finite");
        }
        if (spec.baseline.known && delta <= -spec.baseline.lambda0) {
            throw InvalidParameterError(
                "delta_star must exceed -lambda0 (the intensity must stay "
                "nonnegative)");
        }
    }
    if (spec.location_grid.has_value()) {
        const GridPreset preset = *spec.location_grid;
        const bool preset_conditional =
            preset == GridPreset::theta_d_u || preset == GridPreset::theta_r_u;
        const bool preset_location =
            preset_conditional || preset == GridPreset::theta_d ||
            preset == GridPreset::theta_r;
        if (!preset_location) {
            throw InvalidParameterError(
                std::string("location_grid must be a right-anchored preset "
                            "(theta_d, theta_r, theta_d_u, theta_r_u), got ") +
                grid_preset_id(preset));
        }
        if (preset_conditional != t.conditional) {
            throw InvalidParameterError(
                std::string("location_grid ") + grid_preset_id(preset) +
                (t.conditional
                     ? " is a known-baseline preset; the conditional "
                       "families take theta_d_u or theta_r_u"
                     : " is a conditional preset; the known-baseline "
                       "families take theta_d or theta_r"));
        }
    }
}

// ============================================================================
// Unbiased two-sided splits
// ============================================================================

/// Distribution adapter for the Poisson window count.  The x-weighted tail
/// sums reduce to plain tails through k pmf(k) = xi pmf(k - 1), so every
/// expectation is a partial pmf sum evaluated by the tail routine.
struct PoissonCount {
    double xi = 0.0;

    [[nodiscard]] DiscreteQuantile quantile(double u) const {
        return poisson_quantile(xi, u);
    }
    [[nodiscard]] double pmf(std::uint64_t k) const {
        return poisson_pmf(xi, k);
    }
    [[nodiscard]] double mean() const { return xi; }
    /// E[X 1{X > k}] = xi P(X >= k).
    [[nodiscard]] double xmass_above(std::uint64_t k) const {
        return xi * poisson_upper_tail(xi, k);
    }
    /// E[X 1{X < k}] = xi P(X <= k - 2).
    [[nodiscard]] double xmass_below(std::uint64_t k) const {
        if (k < 2) {
            return 0.0;
        }
        return xi * (1.0 - poisson_upper_tail(xi, k - 1));
    }
};

/// Distribution adapter for the conditional Binomial window count, with the
/// full pmf and its x-weighted prefix sums tabulated once (exact finite
/// support).
struct BinomialCount {
    std::uint64_t n = 0;
    double p = 0.0;
    std::vector<double> pmf_table;
    std::vector<double> xmass_prefix;  ///< xmass_prefix[k] = E[X 1{X <= k}]

    BinomialCount(std::uint64_t n_, double p_) : n(n_), p(p_) {
        pmf_table.resize(n + 1);
        xmass_prefix.resize(n + 1);
        double acc = 0.0;
        for (std::uint64_t k = 0; k <= n; ++k) {
            pmf_table[k] = binomial_pmf(n, p, k);
            acc += static_cast<double>(k) * pmf_table[k];
            xmass_prefix[k] = acc;
        }
    }

    [[nodiscard]] DiscreteQuantile quantile(double u) const {
        return binomial_quantile(n, p, u);
    }
    [[nodiscard]] double pmf(std::uint64_t k) const {
        return k <= n ? pmf_table[k] : 0.0;
    }
    [[nodiscard]] double mean() const { return static_cast<double>(n) * p; }
    [[nodiscard]] double xmass_above(std::uint64_t k) const {
        if (k >= n) {
            return 0.0;
        }
        return xmass_prefix[n] - xmass_prefix[k];
    }
    [[nodiscard]] double xmass_below(std::uint64_t k) const {
        if (k == 0) {
            return 0.0;
        }
        return xmass_prefix[std::min(k - 1, n)];
    }
};

/// Solves the two moment constraints by bisection on the upper-tail share.
/// The residual of the unbiasedness constraint, E[X phi] - alpha E[X], is
/// continuous and increasing in alpha1 (growing alpha1 moves rejection mass
/// from small to large counts), so a sign change over (0, alpha) pins the
/// root.
template <typename Dist>
[[nodiscard]] UmpuSplit solve_two_sided_split(const Dist & dist,
                                              double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0) || !std::isfinite(alpha)) {
        throw InvalidParameterError("level alpha must lie in (0, 1), got " +
                                    std::to_string(alpha));
    }
    const double mean = dist.mean();
    const double tol = 1e-10 * std::max(1.0, mean);

    struct Eval {
        double residual;
        UmpuSplit split;
    };
    const auto eval = [&](double alpha1) -> Eval {
        const double alpha2 = alpha - alpha1;
        const DiscreteQuantile upper = dist.quantile(1.0 - alpha1);
        const DiscreteQuantile lower = dist.quantile(alpha2);
        UmpuSplit split;
        split.alpha1 = alpha1;
        split.alpha2 = alpha2;
        split.upper_boundary = static_cast<std::uint64_t>(upper.value);
        split.lower_boundary = static_cast<std::uint64_t>(lower.value);
        split.gamma_upper = upper_atom_weight(upper, 1.0 - alpha1);
        split.gamma_lower = lower_atom_weight(lower, alpha2);
        double xphi = dist.xmass_above(split.upper_boundary) +
                      dist.xmass_below(split.lower_boundary);
        if (split.upper_boundary == split.lower_boundary) {
            const double atom =
                std::min(1.0, split.gamma_upper + split.gamma_lower);
            xphi += atom * static_cast<double>(split.upper_boundary) *
                    dist.pmf(split.upper_boundary);
        } else {
            xphi += split.gamma_upper *
                        static_cast<double>(split.upper_boundary) *
                        dist.pmf(split.upper_boundary) +
                    split.gamma_lower *
                        static_cast<double>(split.lower_boundary) *
                        dist.pmf(split.lower_boundary);
        }
        return Eval{xphi - alpha * mean, split};
    };

    double lo = alpha * 1e-9;
    double hi = alpha * (1.0 - 1e-9);
    Eval at_lo = eval(lo);
    if (at_lo.residual > tol) {
        throw NumericFailureError(
            "two-sided split: the unbiasedness residual does not bracket a "
            "root (positive at the lower endpoint)");
    }
    Eval at_hi = eval(hi);
    if (at_hi.residual < -tol) {
        throw NumericFailureError(
            "two-sided split: the unbiasedness residual does not bracket a "
            "root (negative at the upper endpoint)");
    }
    if (std::abs(at_lo.residual) <= tol) {
        return at_lo.split;
    }
    if (std::abs(at_hi.residual) <= tol) {
        return at_hi.split;
    }
    for (int iteration = 0; iteration < 200; ++iteration) {
        const double mid = 0.5 * (lo + hi);
        const Eval at_mid = eval(mid);
        if (std::abs(at_mid.residual) <= tol) {
            return at_mid.split;
        }
        if (at_mid.residual < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    throw NumericFailureError(
        "two-sided split bisection did not reach the unbiasedness "
        "tolerance");
}

// ============================================================================
// Shared evaluation helpers
// ============================================================================

/// Observed per-window statistic, through the same count-level kernels the
/// calibration pools use (bit-identical comparisons against pooled
/// thresholds).
[[nodiscard]] double observed_window_stat(const EventSample & sample,
                                          const GridWindow & w,
                                          WindowStatKind kind, bool known,
                                          double lambda0) {
    if (kind == WindowStatKind::abs_lin) {
        return known
                   ? std::abs(lin_stat_known(sample, w.tau1, w.tau2, lambda0))
                   : std::abs(lin_stat_cond(sample, w.tau1, w.tau2));
    }
    return known ? quad_stat_known(sample, w.tau1, w.tau2, lambda0)
                 : quad_stat_cond(sample, w.tau1, w.tau2);
}

/// Marks the report rejected as soon as any ledger margin is positive.
void decide_from_margins(TestReport & report) {
    bool reject = false;
    for (const WindowEntry & entry : report.windows) {
        reject = reject || entry.margin > 0.0;
    }
    report.decision = reject ? Decision::reject : Decision::accept;
    report.reject_probability = reject ? 1.0 : 0.0;
}

/// Fills the report from a randomized single-count comparison: strict
/// rejection wins outright; on a boundary atom the decision randomizes with
/// the atom weight (degenerate weights collapse to Accept / Reject).
void decide_randomized(TestReport & report, bool strict_reject,
                       bool on_atom, double atom) {
    if (strict_reject) {
        report.decision = Decision::reject;
        report.reject_probability = 1.0;
        return;
    }
    if (on_atom && atom > 0.0) {
        if (atom >= 1.0) {
            report.decision = Decision::reject;
            report.reject_probability = 1.0;
            return;
        }
        report.decision = Decision::randomized_reject;
        report.reject_probability = atom;
        return;
    }
    report.decision = Decision::accept;
    report.reject_probability = 0.0;
}

struct EvalContext {
    const DetectorSpec & spec;
    const EventSample & sample;
    CalibrationEngine & engine;
    CalibrationOptions cal;
    Regime regime;
    bool known;
    double lambda0;  ///< known regime only; unused otherwise
};

/// Runs a calibrated multi-window family: per-window observed statistics
/// against the per-window thresholds of the requested correction.
void run_grid_family(EvalContext & ctx, TestReport & report,
                     const WindowGrid & grid, WindowStatKind kind) {
    const GridFamilyCalibration & fam = ctx.engine.grid_family(
        grid, kind, ctx.regime, ctx.spec.alpha, ctx.cal);
    const bool minp = ctx.spec.correction == Correction::min_p;
    const std::vector<double> & thresholds =
        minp ? fam.thresholds_minp : fam.thresholds_bonferroni;
    report.resolved_level = minp ? fam.minp_level : fam.bonferroni_level;
    report.windows.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const GridWindow & w = grid.windows[i];
        const double stat =
            observed_window_stat(ctx.sample, w, kind, ctx.known, ctx.lambda0);
        report.windows.push_back(WindowEntry{
            w.tau1, w.tau2, stat, thresholds[i], stat - thresholds[i],
            "window"});
    }
    report.warnings.insert(report.warnings.end(), fam.warnings.begin(),
                           fam.warnings.end());
    decide_from_margins(report);
}

/// The engine attaches small-budget warnings to grid results; scalar
/// quantile queries return bare doubles, so the same caveat is attached
/// here for the scalar-calibrated families.
void warn_small_budget(const EvalContext & ctx, TestReport & report) {
    if (ctx.cal.budget < 10000) {
        report.warnings.push_back(
            "calibration budget B = " + std::to_string(ctx.cal.budget) +
            " is below 10000; tail critical values are noisy and the "
            "level-alpha guarantee is unreliable");
    }
}

// ============================================================================
// Family evaluations
// ============================================================================

void run_one_sided_count(EvalContext & ctx, TestReport & report, bool lower) {
    const double tau1 = *ctx.spec.tau_star;
    const double tau2 = tau1 + *ctx.spec.ell_star;
    const std::uint64_t c = ctx.sample.count(tau1, tau2);
    const double level = lower ? ctx.spec.alpha : 1.0 - ctx.spec.alpha;
    const DiscreteQuantile q =
        ctx.known ? poisson_quantile(ctx.lambda0 * ctx.regime.scale *
                                         (*ctx.spec.ell_star),
                                     level)
                  : binomial_quantile(ctx.sample.size(), *ctx.spec.ell_star,
                                      level);
    const auto boundary = static_cast<std::uint64_t>(q.value);
    const double stat = static_cast<double>(c);
    const double threshold = static_cast<double>(q.value);
    report.resolved_level = ctx.spec.alpha;
    report.windows.push_back(WindowEntry{
        tau1, tau2, stat, threshold,
        lower ? threshold - stat : stat - threshold,
        lower ? "lower" : "upper"});
    const double atom = lower ? lower_atom_weight(q, ctx.spec.alpha)
                              : upper_atom_weight(q, 1.0 - ctx.spec.alpha);
    const bool strict = lower ? c < boundary : c > boundary;
    decide_randomized(report, strict, c == boundary, atom);
}

void run_two_sided_count(EvalContext & ctx, TestReport & report) {
    const double tau1 = *ctx.spec.tau_star;
    const double tau2 = tau1 + *ctx.spec.ell_star;
    const std::uint64_t c = ctx.sample.count(tau1, tau2);
    const UmpuSplit split =
        ctx.known
            ? umpu_split_known(ctx.lambda0, *ctx.spec.ell_star,
                               ctx.regime.scale, ctx.spec.alpha)
            : umpu_split_conditional(ctx.sample.size(), *ctx.spec.ell_star,
                                     ctx.spec.alpha);
    const double stat = static_cast<double>(c);
    const double upper = static_cast<double>(split.upper_boundary);
    const double lower = static_cast<double>(split.lower_boundary);
    report.resolved_level = ctx.spec.alpha;
    report.windows.push_back(
        WindowEntry{tau1, tau2, stat, upper, stat - upper, "upper"});
    report.windows.push_back(
        WindowEntry{tau1, tau2, stat, lower, lower - stat, "lower"});
    const bool strict =
        c > split.upper_boundary || c < split.lower_boundary;
    double atom = 0.0;
    bool on_atom = false;
    if (split.upper_boundary == split.lower_boundary) {
        on_atom = c == split.upper_boundary;
        atom = std::min(1.0, split.gamma_upper + split.gamma_lower);
    } else if (c == split.upper_boundary) {
        on_atom = true;
        atom = split.gamma_upper;
    } else if (c == split.lower_boundary) {
        on_atom = true;
        atom = split.gamma_lower;
    }
    decide_randomized(report, strict, on_atom, atom);
}

void run_single_window_quad(EvalContext & ctx, TestReport & report) {
    const double tau1 = *ctx.spec.tau_star;
    const double tau2 = tau1 + *ctx.spec.ell_star;
    const double stat =
        ctx.known ? quad_stat_known(ctx.sample, tau1, tau2, ctx.lambda0)
                  : quad_stat_cond(ctx.sample, tau1, tau2);
    const double threshold = ctx.engine.window_stat_quantile(
        tau1, tau2, WindowStatKind::quad, ctx.regime, 1.0 - ctx.spec.alpha,
        ctx.cal);
    report.resolved_level = ctx.spec.alpha;
    report.windows.push_back(WindowEntry{tau1, tau2, stat, threshold,
                                         stat - threshold, "window"});
    warn_small_budget(ctx, report);
    decide_from_margins(report);
}

/// Scanned length: the declared one under a known baseline, capped at 1/2
/// for the conditional scan (windows longer than half the interval carry
/// no additional conditional information).
[[nodiscard]] double scanned_length(const EvalContext & ctx) {
    const double ell = *ctx.spec.ell_star;
    return ctx.known ? ell : std::min(ell, 0.5);
}

void run_scan_one_sided(EvalContext & ctx, TestReport & report, bool lower) {
    const double ell = scanned_length(ctx);
    const WindowExtremum extremum = lower
                                        ? window_min_count(ctx.sample, ell)
                                        : window_max_count(ctx.sample, ell);
    const double threshold =
        lower ? ctx.engine.scan_min_quantile(ell, ctx.regime, ctx.spec.alpha,
                                             ctx.cal)
              : ctx.engine.scan_max_quantile(ell, ctx.regime,
                                             1.0 - ctx.spec.alpha, ctx.cal);
    const double stat = static_cast<double>(extremum.count);
    report.resolved_level = ctx.spec.alpha;
    report.windows.push_back(WindowEntry{
        extremum.tau, extremum.tau + ell, stat, threshold,
        lower ? threshold - stat : stat - threshold,
        lower ? "lower" : "upper"});
    warn_small_budget(ctx, report);
    decide_from_margins(report);
}

void run_scan_two_sided(EvalContext & ctx, TestReport & report) {
    const double ell = scanned_length(ctx);
    const ScanExtremaCalibration & cal = ctx.engine.scan_extrema(
        ell, ctx.regime, ctx.spec.alpha, ctx.cal);
    const bool minp = ctx.spec.correction == Correction::min_p;
    const double upper = minp ? cal.upper_minp : cal.upper_bonferroni;
    const double lower = minp ? cal.lower_minp : cal.lower_bonferroni;
    report.resolved_level = minp ? cal.minp_level : cal.bonferroni_level;
    const WindowExtremum max = window_max_count(ctx.sample, ell);
    const WindowExtremum min = window_min_count(ctx.sample, ell);
    const double max_stat = static_cast<double>(max.count);
    const double min_stat = static_cast<double>(min.count);
    report.windows.push_back(WindowEntry{max.tau, max.tau + ell, max_stat,
                                         upper, max_stat - upper, "upper"});
    report.windows.push_back(WindowEntry{min.tau, min.tau + ell, min_stat,
                                         lower, lower - min_stat, "lower"});
    report.warnings.insert(report.warnings.end(), cal.warnings.begin(),
                           cal.warnings.end());
    decide_from_margins(report);
}

void run_sup_length(EvalContext & ctx, TestReport & report) {
    const double tau_star = *ctx.spec.tau_star;
    const double delta_star = *ctx.spec.delta_star;
    const SupResult sup = sup_shifted_over_length(
        ctx.sample, tau_star, delta_star, ctx.known, ctx.lambda0);
    const double threshold = ctx.engine.sup_length_quantile(
        tau_star, delta_star, ctx.regime, 1.0 - ctx.spec.alpha, ctx.cal);
    report.resolved_level = ctx.spec.alpha;
    report.windows.push_back(WindowEntry{tau_star, tau_star + sup.arg,
                                         sup.value, threshold,
                                         sup.value - threshold,
                                         "sup_length"});
    warn_small_budget(ctx, report);
    decide_from_margins(report);
}

void run_sup_location(EvalContext & ctx, TestReport & report) {
    const double delta_star = *ctx.spec.delta_star;
    const SupResult sup = sup_shifted_over_location(ctx.sample, delta_star,
                                                    ctx.known, ctx.lambda0);
    const double threshold = ctx.engine.sup_location_quantile(
        delta_star, ctx.regime, 1.0 - ctx.spec.alpha, ctx.cal);
    report.resolved_level = ctx.spec.alpha;
    report.windows.push_back(WindowEntry{sup.arg, 1.0, sup.value, threshold,
                                         sup.value - threshold,
                                         "sup_location"});
    warn_small_budget(ctx, report);
    decide_from_margins(report);
}

void run_laplace(EvalContext & ctx, TestReport & report) {
    const std::size_t n = ctx.sample.size();
    report.resolved_level = ctx.spec.alpha / 2.0;
    if (n == 0) {
        report.decision = Decision::accept;
        report.reject_probability = 0.0;
        return;
    }
    double sum = 0.0;
    for (const double t : ctx.sample.times()) {
        sum += t;
    }
    const double upper = ctx.engine.laplace_sum_quantile(
        n, 1.0 - ctx.spec.alpha / 2.0, ctx.cal);
    const double lower =
        ctx.engine.laplace_sum_quantile(n, ctx.spec.alpha / 2.0, ctx.cal);
    report.windows.push_back(
        WindowEntry{0.0, 1.0, sum, upper, sum - upper, "upper"});
    report.windows.push_back(
        WindowEntry{0.0, 1.0, sum, lower, lower - sum, "lower"});
    warn_small_budget(ctx, report);
    decide_from_margins(report);
}

void run_z(const EventSample & sample, double alpha, TestReport & report) {
    const std::size_t n = sample.size();
    report.resolved_level = alpha / 2.0;
    if (n == 0) {
        report.decision = Decision::accept;
        report.reject_probability = 0.0;
        return;
    }
    double stat = 0.0;
    for (const double t : sample.times()) {
        stat -= 2.0 * std::log(t);
    }
    const double df = 2.0 * static_cast<double>(n);
    const double lower = chi_squared_quantile(df, alpha / 2.0);
    const double upper = chi_squared_quantile(df, 1.0 - alpha / 2.0);
    report.windows.push_back(
        WindowEntry{0.0, 1.0, stat, upper, stat - upper, "upper"});
    report.windows.push_back(
        WindowEntry{0.0, 1.0, stat, lower, lower - stat, "lower"});
    decide_from_margins(report);
}

void dispatch(EvalContext & ctx, TestReport & report) {
    const double scale = ctx.sample.scale();
    switch (ctx.spec.family) {
        case Family::phi1_minus_known:
        case Family::phi1_minus_cond:
            run_one_sided_count(ctx, report, /*lower=*/true);
            return;
        case Family::phi1_plus_known:
        case Family::phi1_plus_cond:
            run_one_sided_count(ctx, report, /*lower=*/false);
            return;
        case Family::phi2_lin_known:
        case Family::phi2_lin_cond:
            run_two_sided_count(ctx, report);
            return;
        case Family::phi2_quad_known:
        case Family::phi2_quad_cond:
            run_single_window_quad(ctx, report);
            return;
        case Family::phi3_lin_minus_known:
        case Family::phi3_lin_minus_cond:
            run_scan_one_sided(ctx, report, /*lower=*/true);
            return;
        case Family::phi3_lin_plus_known:
        case Family::phi3_lin_plus_cond:
            run_scan_one_sided(ctx, report, /*lower=*/false);
            return;
        case Family::phi4_lin_known:
        case Family::phi4_lin_cond:
            run_scan_two_sided(ctx, report);
            return;
        case Family::phi3_4_quad_known:
        case Family::phi3_4_quad_cond:
            run_grid_family(ctx, report,
                            shifted_window_grid(*ctx.spec.ell_star,
                                                ctx.known),
                            WindowStatKind::quad);
            return;
        case Family::phi5_known:
        case Family::phi5_cond:
            run_sup_length(ctx, report);
            return;
        case Family::phi6_lin_known:
        case Family::phi6_lin_cond:
            run_grid_family(ctx, report,
                            dyadic_length_grid(*ctx.spec.tau_star, scale),
                            WindowStatKind::abs_lin);
            return;
        case Family::phi6_quad_known:
        case Family::phi6_quad_cond:
            run_grid_family(ctx, report,
                            dyadic_length_grid(*ctx.spec.tau_star, scale),
                            WindowStatKind::quad);
            return;
        case Family::phi7_known:
        case Family::phi7_cond:
            run_sup_location(ctx, report);
            return;
        case Family::phi8_lin_known:
        case Family::phi8_quad_known: {
            const GridPreset preset =
                ctx.spec.location_grid.value_or(GridPreset::theta_d);
            run_grid_family(ctx, report, make_grid(preset, scale),
                            ctx.spec.family == Family::phi8_lin_known
                                ? WindowStatKind::abs_lin
                                : WindowStatKind::quad);
            return;
        }
        case Family::phi8_lin_cond:
        case Family::phi8_quad_cond: {
            const GridPreset preset =
                ctx.spec.location_grid.value_or(GridPreset::theta_d_u);
            run_grid_family(ctx, report, make_grid(preset, scale),
                            ctx.spec.family == Family::phi8_lin_cond
                                ? WindowStatKind::abs_lin
                                : WindowStatKind::quad);
            return;
        }
        case Family::phi9_10_lin_known:
        case Family::phi9_10_lin_cond:
            run_grid_family(ctx, report,
                            make_grid(GridPreset::theta_1, scale),
                            WindowStatKind::abs_lin);
            return;
        case Family::phi9_10_quad_known:
            run_grid_family(ctx, report,
                            make_grid(GridPreset::theta_1, scale),
                            WindowStatKind::quad);
            return;
        case Family::phi9_10_quad_cond:
            run_grid_family(ctx, report,
                            make_grid(GridPreset::theta_2, scale),
                            WindowStatKind::quad);
            return;
        case Family::laplace:
            run_laplace(ctx, report);
            return;
        case Family::z_test:
            run_z(ctx.sample, ctx.spec.alpha, report);
            return;
    }
    throw InvalidParameterError("unknown detector family");
}

// ============================================================================
// JSON helpers
// ============================================================================

using nlohmann::json;

[[nodiscard]] json parse_json(const std::string & text) {
    json parsed = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) {
        throw InvalidParameterError("malformed JSON detector specification");
    }
    return parsed;
}

}  // namespace

// ============================================================================
// Families
// ============================================================================

const char * family_id(Family family) { return traits(family).id; }

Family family_from_id(const std::string & id) {
    for (std::size_t i = 0; i < kFamilyCount; ++i) {
        if (id == kFamilyTraits[i].id) {
            return static_cast<Family>(i);
        }
    }
    throw InvalidParameterError("unknown detector family id: " + id);
}

const std::vector<Family> & all_families() {
    static const std::vector<Family> families = [] {
        std::vector<Family> out;
        out.reserve(kFamilyCount);
        for (std::size_t i = 0; i < kFamilyCount; ++i) {
            out.push_back(static_cast<Family>(i));
        }
        return out;
    }();
    return families;
}

bool family_is_conditional(Family family) { return traits(family).conditional; }

// ============================================================================
// Specification
// ============================================================================

Baseline Baseline::known_rate(double lambda0) {
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) {
        throw InvalidParameterError(
            "known baseline rate must be positive and finite, got " +
            std::to_string(lambda0));
    }
    Baseline b;
    b.known = true;
    b.lambda0 = lambda0;
    return b;
}

Baseline Baseline::unknown_bounded(double bound) {
    if (!(bound > 0.0) || !std::isfinite(bound)) {
        throw InvalidParameterError(
            "baseline bound must be positive and finite, got " +
            std::to_string(bound));
    }
    Baseline b;
    b.known = false;
    b.bound = bound;
    return b;
}

const char * correction_id(Correction correction) {
    return correction == Correction::bonferroni ? "bonferroni" : "min_p";
}

Correction correction_from_id(const std::string & id) {
    if (id == "bonferroni") {
        return Correction::bonferroni;
    }
    if (id == "min_p") {
        return Correction::min_p;
    }
    throw InvalidParameterError("unknown correction id: " + id);
}

std::string DetectorSpec::to_json() const {
    json out;
    out["family"] = family_id(family);
    if (baseline.known) {
        out["baseline"] = {{"type", "known"}, {"lambda0", baseline.lambda0}};
    } else {
        out["baseline"] = {{"type", "unknown_bounded"},
                           {"bound", baseline.bound}};
    }
    out["alpha"] = alpha;
    out["correction"] = correction_id(correction);
    if (tau_star) {
        out["tau_star"] = *tau_star;
    }
    if (ell_star) {
        out["ell_star"] = *ell_star;
    }
    if (delta_star) {
        out["delta_star"] = *delta_star;
    }
    if (location_grid) {
        out["location_grid"] = grid_preset_id(*location_grid);
    }
    out["budget"] = budget;
    out["seed"] = seed;
    if (aux_seed) {
        out["aux_seed"] = *aux_seed;
    }
    return out.dump();
}

DetectorSpec DetectorSpec::from_json(const std::string & text) {
    const json in = parse_json(text);
    if (!in.is_object()) {
        throw InvalidParameterError(
            "detector specification must be a JSON object");
    }
    static const char * const known_keys[] = {
        "family", "baseline",      "alpha",  "correction", "tau_star",
        "ell_star", "delta_star", "location_grid", "budget", "seed",
        "aux_seed"};
    for (const auto & item : in.items()) {
        bool recognized = false;
        for (const char * key : known_keys) {
            recognized = recognized || item.key() == key;
        }
        if (!recognized) {
            throw InvalidParameterError(
                "unknown key in detector specification: " + item.key());
        }
    }
    DetectorSpec spec;
    try {
        spec.family = family_from_id(in.at("family").get<std::string>());
        if (in.contains("baseline")) {
            const json & b = in.at("baseline");
            const std::string type = b.at("type").get<std::string>();
            if (type == "known") {
                spec.baseline = Baseline::known_rate(
                    b.at("lambda0").get<double>());
            } else if (type == "unknown_bounded") {
                spec.baseline = Baseline::unknown_bounded(
                    b.at("bound").get<double>());
            } else {
                throw InvalidParameterError("unknown baseline type: " + type);
            }
        }
        if (in.contains("alpha")) {
            spec.alpha = in.at("alpha").get<double>();
        }
        if (in.contains("correction")) {
            spec.correction =
                correction_from_id(in.at("correction").get<std::string>());
        }
        if (in.contains("tau_star")) {
            spec.tau_star = in.at("tau_star").get<double>();
        }
        if (in.contains("ell_star")) {
            spec.ell_star = in.at("ell_star").get<double>();
        }
        if (in.contains("delta_star")) {
            spec.delta_star = in.at("delta_star").get<double>();
        }
        if (in.contains("location_grid")) {
            spec.location_grid = grid_preset_from_id(
                in.at("location_grid").get<std::string>());
        }
        if (in.contains("budget")) {
            spec.budget = in.at("budget").get<std::uint64_t>();
        }
        if (in.contains("seed")) {
            spec.seed = in.at("seed").get<std::uint64_t>();
        }
        if (in.contains("aux_seed")) {
            spec.aux_seed = in.at("aux_seed").get<std::uint64_t>();
        }
    } catch (const json::exception & error) {
        throw InvalidParameterError(
            std::string("malformed detector specification: ") + error.what());
    }
    return spec;
}

// ============================================================================
// Reports
// ============================================================================

const char * decision_id(Decision decision) {
    switch (decision) {
        case Decision::accept:
            return "accept";
        case Decision::reject:
            return "reject";
        case Decision::randomized_reject:
            return "randomized_reject";
    }
    return "accept";
}

std::string TestReport::to_json() const {
    json out;
    out["family"] = family;
    out["decision"] = decision_id(decision);
    out["reject_probability"] = reject_probability;
    out["resolved_level"] = resolved_level;
    json rows = json::array();
    for (const WindowEntry & entry : windows) {
        rows.push_back({{"tau1", entry.tau1},
                        {"tau2", entry.tau2},
                        {"stat", entry.stat},
                        {"threshold", entry.threshold},
                        {"margin", entry.margin},
                        {"label", entry.label}});
    }
    out["windows"] = std::move(rows);
    out["warnings"] = warnings;
    out["calibration_seed"] = calibration_seed;
    if (aux_seed) {
        out["aux_seed"] = *aux_seed;
    }
    if (aux_uniform) {
        out["aux_uniform"] = *aux_uniform;
    }
    if (d2_alternative >= 0.0) {
        out["d2_alternative"] = d2_alternative;
    }
    return out.dump();
}

// ============================================================================
// Evaluation
// ============================================================================

TestReport run_detector(const DetectorSpec & spec, const EventSample & sample,
                        CalibrationEngine & engine,
                        const RunOptions & options) {
    validate_spec(spec);
    TestReport report;
    report.family = family_id(spec.family);
    report.calibration_seed = spec.seed;
    report.aux_seed = spec.aux_seed;

    CalibrationOptions cal;
    cal.budget = spec.budget;
    cal.seed = spec.seed;
    cal.allow_compute = options.allow_calibration;
    cal.validation_pool = options.validation_pool;
    cal.max_conditional_n = options.max_conditional_n;

    const bool known = !family_is_conditional(spec.family);
    EvalContext ctx{
        spec,
        sample,
        engine,
        cal,
        known ? Regime::known(spec.baseline.lambda0, sample.scale())
              : Regime::given_total(sample.size(), sample.scale()),
        known,
        known ? spec.baseline.lambda0 : 0.0,
    };
    dispatch(ctx, report);

    if (report.decision == Decision::randomized_reject && spec.aux_seed) {
        Rng aux(*spec.aux_seed);
        Rng stream = aux.substream("aux-uniform");
        const double u = stream.uniform01();
        report.aux_uniform = u;
        report.decision =
            u < report.reject_probability ? Decision::reject
                                          : Decision::accept;
    }
    return report;
}

// ============================================================================
// Randomized two-sided splits
// ============================================================================

UmpuSplit umpu_split_known(double lambda0, double ell_star, double scale,
                           double alpha) {
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) {
        throw InvalidParameterError(
            "known baseline rate must be positive and finite");
    }
    if (!(ell_star > 0.0) || !(ell_star <= 1.0) || !std::isfinite(ell_star)) {
        throw InvalidParameterError(
            "window length ell_star must lie in (0, 1]");
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw InvalidParameterError(
            "observation scale must be positive and finite");
    }
    return solve_two_sided_split(
        PoissonCount{lambda0 * ell_star * scale}, alpha);
}

UmpuSplit umpu_split_conditional(std::uint64_t n, double ell_star,
                                 double alpha) {
    if (!(ell_star > 0.0) || !(ell_star <= 1.0) || !std::isfinite(ell_star)) {
        throw InvalidParameterError(
            "window length ell_star must lie in (0, 1]");
    }
    if (!(alpha > 0.0) || !(alpha < 1.0) || !std::isfinite(alpha)) {
        throw InvalidParameterError("level alpha must lie in (0, 1), got " +
                                    std::to_string(alpha));
    }
    if (n == 0) {
        UmpuSplit split;
        split.alpha1 = alpha / 2.0;
        split.alpha2 = alpha / 2.0;
        split.lower_boundary = 0;
        split.upper_boundary = 0;
        split.gamma_lower = alpha / 2.0;
        split.gamma_upper = alpha / 2.0;
        return split;
    }
    return solve_two_sided_split(BinomialCount(n, ell_star), alpha);
}

// ============================================================================
// Conditional uniformity references
// ============================================================================

TestReport laplace_test(const EventSample & sample, double alpha,
                        CalibrationEngine & engine,
                        const RunOptions & options) {
    DetectorSpec spec;
    spec.family = Family::laplace;
    spec.baseline = Baseline::unknown_bounded(1.0);
    spec.alpha = alpha;
    return run_detector(spec, sample, engine, options);
}

TestReport z_test(const EventSample & sample, double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0) || !std::isfinite(alpha)) {
        throw InvalidParameterError("level alpha must lie in (0, 1), got " +
                                    std::to_string(alpha));
    }
    TestReport report;
    report.family = family_id(Family::z_test);
    run_z(sample, alpha, report);
    return report;
}

}  // namespace pcd
