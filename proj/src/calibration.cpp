/**
 * @file calibration.cpp
 * @brief Implementation of the Monte-Carlo calibration engine.
 */

#include "pcd/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <utility>

#include "pcd/errors.hpp"
#include "pcd/event_sample.hpp"
#include "pcd/parallel.hpp"
#include "pcd/rng.hpp"
#include "pcd/statistics.hpp"

namespace pcd {

namespace {

// ============================================================================
// Small shared helpers
// ============================================================================

std::string fmt17(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

std::string hex16(std::uint64_t v) {
    std::ostringstream out;
    out << std::hex << std::setfill('0') << std::setw(16) << v;
    return out.str();
}

/// 1-based ascending rank of the empirical u-quantile of a pool of size
/// budget: ceil(u * budget), clamped to [1, budget].  The tiny slack keeps a
/// floating product that is an integer up to rounding (e.g. 0.95 * 200000)
/// from spilling to the next rank.
std::uint64_t order_stat_rank(double u, std::uint64_t budget) {
    const double raw =
        std::ceil(u * static_cast<double>(budget) - 1e-9);
    if (!(raw >= 1.0)) {
        return 1;
    }
    const auto rank = static_cast<std::uint64_t>(raw);
    return std::min<std::uint64_t>(budget, rank);
}

/// Collision-proof grid identifier: the human-readable id plus a
/// fingerprint of the exact window endpoints.
std::string grid_token(const WindowGrid & grid) {
    std::string acc;
    acc.reserve(grid.windows.size() * 48);
    for (const auto & w : grid.windows) {
        acc += fmt17(w.tau1);
        acc += ',';
        acc += fmt17(w.tau2);
        acc += ';';
    }
    return grid.id + "#" + hex16(fnv1a64(acc));
}

void require_level(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) {
        throw InvalidParameterError(
            "a test level must lie strictly inside (0, 1), got " +
            std::to_string(alpha));
    }
}

void require_budget(const CalibrationOptions & options) {
    if (options.budget == 0) {
        throw BudgetError("the Monte-Carlo calibration budget must be >= 1");
    }
}

void require_conditional_budget(const Regime & regime,
                                const CalibrationOptions & options) {
    if (regime.conditional && regime.n > options.max_conditional_n) {
        throw BudgetError(
            "conditional calibration at total count n = " +
            std::to_string(regime.n) +
            " exceeds the configured bound max_conditional_n = " +
            std::to_string(options.max_conditional_n));
    }
}

void append_budget_warnings(const CalibrationOptions & options,
                            std::vector<std::string> & warnings) {
    if (options.budget < 10000) {
        warnings.push_back(
            "calibration budget B = " + std::to_string(options.budget) +
            " is below 10000; tail critical values are noisy and the "
            "level-alpha guarantee is unreliable");
    }
}

/// Statistic map of one window as a function of the raw window count.
class WindowStat {
  public:
    WindowStat(WindowStatKind kind, const Regime & regime, double rho)
        : kind_(kind),
          conditional_(regime.conditional),
          rho_(rho),
          lambda0_(regime.lambda0),
          scale_(regime.scale),
          total_(static_cast<double>(regime.n)) {}

    [[nodiscard]] double operator()(std::uint32_t c) const {
        const double count = static_cast<double>(c);
        if (kind_ == WindowStatKind::abs_lin) {
            return conditional_
                       ? std::abs(lin_kernel_cond(count, rho_, total_))
                       : std::abs(lin_kernel_known(count, rho_, lambda0_,
                                                   scale_));
        }
        return conditional_
                   ? quad_kernel_cond(count, total_ - count, rho_, scale_)
                   : quad_kernel_known(count, rho_, lambda0_, scale_);
    }

  private:
    WindowStatKind kind_;
    bool conditional_;
    double rho_;
    double lambda0_;
    double scale_;
    double total_;
};

using CountHist = std::vector<std::uint32_t>;

/// Ascending distinct statistic values of one window with inclusive
/// cumulative pool masses; the last cumulative mass equals the budget.
struct StatTable {
    std::vector<double> values;
    std::vector<std::uint64_t> cum;
};

StatTable make_stat_table(const CountHist & hist, const WindowStat & stat) {
    std::vector<std::pair<double, std::uint32_t>> entries;  // (value, count)
    entries.reserve(hist.size());
    for (std::uint32_t c = 0; c < hist.size(); ++c) {
        if (hist[c] != 0) {
            entries.emplace_back(stat(c), c);
        }
    }
    std::sort(entries.begin(), entries.end());
    StatTable table;
    table.values.reserve(entries.size());
    table.cum.reserve(entries.size());
    std::uint64_t running = 0;
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i;
        std::uint64_t mass = 0;
        while (j < entries.size() && entries[j].first == entries[i].first) {
            mass += hist[entries[j].second];
            ++j;
        }
        running += mass;
        table.values.push_back(entries[i].first);
        table.cum.push_back(running);
        i = j;
    }
    return table;
}

/// The statistic value of ascending rank `rank` (1-based) in the pool.
double table_threshold(const StatTable & table, std::uint64_t rank) {
    const auto it =
        std::lower_bound(table.cum.begin(), table.cum.end(), rank);
    const auto idx = static_cast<std::size_t>(it - table.cum.begin());
    return table.values[std::min(idx, table.values.size() - 1)];
}

/// rank_table[c] = number of pool entries whose statistic value is strictly
/// below the statistic at count c (defined for counts present in the pool).
/// The exceedance f(c) > t(1-u) is then equivalent to
/// rank_table[c] >= order_stat_rank(1-u, B), ties included exactly.
std::vector<std::uint32_t> make_rank_table(const CountHist & hist,
                                           const WindowStat & stat) {
    std::vector<std::pair<double, std::uint32_t>> entries;
    entries.reserve(hist.size());
    for (std::uint32_t c = 0; c < hist.size(); ++c) {
        if (hist[c] != 0) {
            entries.emplace_back(stat(c), c);
        }
    }
    std::sort(entries.begin(), entries.end());
    std::vector<std::uint32_t> rank(hist.size(), 0);
    std::uint64_t below = 0;
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i;
        std::uint64_t mass = 0;
        while (j < entries.size() && entries[j].first == entries[i].first) {
            mass += hist[entries[j].second];
            ++j;
        }
        for (std::size_t k = i; k < j; ++k) {
            rank[entries[k].second] = static_cast<std::uint32_t>(below);
        }
        below += mass;
        i = j;
    }
    return rank;
}

/// Draws one replicate of segment counts (cumulative, written into
/// prefix[0..segments]): independent Poisson per segment under a known
/// baseline, a sequential binomial split of n (an exact multinomial) in the
/// conditional regime.
void draw_segments(Rng & rng, const Regime & regime,
                   const std::vector<double> & cuts,
                   std::uint32_t * prefix) {
    const std::size_t segments = cuts.size() - 1;
    prefix[0] = 0;
    if (!regime.conditional) {
        std::uint64_t cum = 0;
        for (std::size_t j = 1; j <= segments; ++j) {
            const double mean =
                regime.lambda0 * regime.scale * (cuts[j] - cuts[j - 1]);
            cum += rng.poisson(mean);
            prefix[j] = static_cast<std::uint32_t>(cum);
        }
        return;
    }
    std::uint64_t remaining = regime.n;
    double remaining_len = 1.0;
    std::uint64_t cum = 0;
    for (std::size_t j = 1; j < segments; ++j) {
        const double len = cuts[j] - cuts[j - 1];
        std::uint64_t c = 0;
        if (remaining > 0) {
            const double p =
                std::clamp(len / remaining_len, 0.0, 1.0);
            std::binomial_distribution<std::uint64_t> split(remaining, p);
            c = split(rng.engine());
        }
        remaining -= c;
        remaining_len -= len;
        cum += c;
        prefix[j] = static_cast<std::uint32_t>(cum);
    }
    cum += remaining;
    prefix[segments] = static_cast<std::uint32_t>(cum);
}

/// One replicate of a full event sample under the regime's null.
EventSample draw_sample(Rng & rng, const Regime & regime) {
    if (!regime.conditional) {
        return simulate(rng, IntensityProfile::constant(regime.lambda0),
                        regime.scale);
    }
    std::vector<double> times;
    times.reserve(regime.n);
    for (std::uint64_t k = 0; k < regime.n; ++k) {
        times.push_back(rng.uniform_left_open());
    }
    return EventSample(regime.scale, std::move(times));
}

/// Suffix counts over a pool of per-replicate maximal ranks: result[r] =
/// number of replicates whose maximal rank is >= r, for r in [0, budget].
std::vector<std::uint64_t> suffix_counts(const std::vector<std::uint32_t> & g,
                                         std::uint64_t budget) {
    std::vector<std::uint64_t> count(budget + 2, 0);
    for (const std::uint32_t v : g) {
        ++count[v];
    }
    std::vector<std::uint64_t> suffix(budget + 2, 0);
    for (std::uint64_t r = budget; r + 1 > 0; --r) {
        suffix[r] = suffix[r + 1] + count[r];
        if (r == 0) {
            break;
        }
    }
    return suffix;
}

/// Largest level in [lo, alpha] whose empirical family-wise rejection
/// probability stays <= alpha, by dichotomy (absolute tolerance 1e-6, at
/// most 40 iterations).  reject_count(u) must be nondecreasing in u.
template <typename RejectCount>
double minp_dichotomy(double lo, double alpha, std::uint64_t budget,
                      RejectCount && reject_count) {
    const auto limit = static_cast<double>(budget) * alpha;
    if (static_cast<double>(reject_count(lo)) > limit) {
        throw CalibrationFailureError(
            "min-p level search cannot bracket: the family-wise rejection "
            "probability exceeds the target level even at the Bonferroni "
            "per-window level " +
            std::to_string(lo));
    }
    if (static_cast<double>(reject_count(alpha)) <= limit) {
        return alpha;
    }
    double hi = alpha;
    for (int iter = 0; iter < 40 && (hi - lo) > 1e-6; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (static_cast<double>(reject_count(mid)) <= limit) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

constexpr std::size_t kWindowBlock = 128;

}  // namespace

// ============================================================================
// Regime
// ============================================================================

Regime Regime::known(double lambda0, double scale) {
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) {
        throw InvalidParameterError(
            "the known-baseline regime requires a rate lambda0 > 0, got " +
            std::to_string(lambda0));
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw InvalidParameterError(
            "the observation scale L must be > 0, got " +
            std::to_string(scale));
    }
    if (lambda0 * scale > 1e8) {
        throw UnsupportedParameterError(
            "calibration pools require lambda0 * L <= 1e8 (expected counts "
            "beyond that are not supported), got " +
            std::to_string(lambda0 * scale));
    }
    Regime regime;
    regime.conditional = false;
    regime.lambda0 = lambda0;
    regime.scale = scale;
    return regime;
}

Regime Regime::given_total(std::uint64_t n, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw InvalidParameterError(
            "the observation scale L must be > 0, got " +
            std::to_string(scale));
    }
    Regime regime;
    regime.conditional = true;
    regime.n = n;
    regime.scale = scale;
    return regime;
}

std::string Regime::token() const {
    if (conditional) {
        return "cond:n=" + std::to_string(n) + ",L=" + fmt17(scale);
    }
    return "known:l0=" + fmt17(lambda0) + ",L=" + fmt17(scale);
}

const char * window_stat_kind_id(WindowStatKind kind) {
    switch (kind) {
        case WindowStatKind::abs_lin: return "abs_lin";
        case WindowStatKind::quad: return "quad";
    }
    throw InvalidParameterError("unknown window statistic kind enumerator");
}

// ============================================================================
// Engine plumbing
// ============================================================================

CalibrationEngine::CalibrationEngine(CriticalValueStore * store)
    : store_(store) {}

void CalibrationEngine::clear_cache() {
    std::lock_guard<std::mutex> lock(mutex_);
    family_cache_.clear();
    scan_cache_.clear();
    scalar_cache_.clear();
    matrix_slot_ = MatrixSlot{};
}

void CalibrationEngine::ensure_segment_pool(const WindowGrid & grid,
                                            const Regime & regime,
                                            const CalibrationOptions & options,
                                            const std::string & salt) {
    const std::string tag = "segpool|" + salt + "|" + grid_token(grid) + "|" +
                            regime.token();
    const std::string key = tag + "|B=" + std::to_string(options.budget) +
                            "|seed=" + std::to_string(options.seed);
    if (matrix_slot_.key == key) {
        return;
    }
    const std::size_t budget = options.budget;
    const std::size_t row = grid.cuts.size();
    MatrixSlot slot;
    slot.key = key;
    slot.row = row;
    slot.prefix.resize(budget * row);
    const Rng base(options.seed);
    auto * data = slot.prefix.data();
    const auto & cuts = grid.cuts;
    parallel_for(budget, [&](std::size_t i) {
        Rng rng = base.substream(tag, i);
        draw_segments(rng, regime, cuts, data + i * row);
    });
    matrix_slot_ = std::move(slot);
}

double CalibrationEngine::scalar_quantile(
    const StoreKey & key, const CalibrationOptions & options,
    const std::function<double()> & compute) {
    const std::string canonical = key.canonical();
    if (const auto it = scalar_cache_.find(canonical);
        it != scalar_cache_.end()) {
        return it->second;
    }
    if (store_ != nullptr) {
        if (const auto hit = store_->lookup(key)) {
            scalar_cache_.emplace(canonical, *hit);
            return *hit;
        }
    }
    if (!options.allow_compute) {
        throw CalibrationRequiredError(
            "missing calibration record: " + canonical +
            "; run the calibrate step first or allow on-the-fly "
            "calibration");
    }
    const double value = compute();
    scalar_cache_.emplace(canonical, value);
    if (store_ != nullptr) {
        store_->record(key, value);
    }
    return value;
}

// ============================================================================
// Multi-window families
// ============================================================================

GridFamilyCalibration CalibrationEngine::compute_grid_family(
    const WindowGrid & grid, WindowStatKind kind, const Regime & regime,
    double alpha, const CalibrationOptions & options) {
    const std::size_t window_count = grid.windows.size();
    const std::uint64_t budget = options.budget;

    GridFamilyCalibration result;
    result.grid = grid;
    result.kind = kind;
    result.regime = regime;
    result.alpha = alpha;
    result.bonferroni_level = bonferroni_level(alpha, window_count);
    append_budget_warnings(options, result.warnings);

    // Window laws, validated once before any simulation.
    std::vector<WindowStat> stats;
    stats.reserve(window_count);
    for (const auto & w : grid.windows) {
        const double rho = w.tau2 - w.tau1;
        if (kind == WindowStatKind::quad && regime.conditional &&
            rho >= 1.0) {
            throw DegenerateWindowError(
                "the conditional quadratic statistic is undefined on the "
                "full observation window (0, 1]; drop that window from the "
                "collection");
        }
        stats.emplace_back(kind, regime, rho);
    }

    ensure_segment_pool(grid, regime, options, "main");
    const auto & prefix = matrix_slot_.prefix;
    const std::size_t row = matrix_slot_.row;

    // Pass A/B interleaved over window blocks: per-window count histograms
    // (kept for threshold extraction) and the per-replicate maximal rank
    // g[i] = max over windows of #{pool entries strictly below the
    // replicate's statistic}, which drives the min-p dichotomy.
    std::vector<CountHist> hists(window_count);
    std::vector<std::uint32_t> g(budget, 0);
    for (std::size_t block = 0; block < window_count;
         block += kWindowBlock) {
        const std::size_t end = std::min(block + kWindowBlock, window_count);
        std::vector<std::vector<std::uint32_t>> rank_tables(end - block);
        parallel_for(end - block, [&](std::size_t k) {
            const std::size_t w = block + k;
            const auto span = grid.spans[w];
            CountHist & hist = hists[w];
            for (std::size_t i = 0; i < budget; ++i) {
                const std::uint32_t c = prefix[i * row + span.second] -
                                        prefix[i * row + span.first];
                if (c >= hist.size()) {
                    hist.resize(c + 1, 0);
                }
                ++hist[c];
            }
            rank_tables[k] = make_rank_table(hist, stats[w]);
        }, 1);
        parallel_for(budget, [&](std::size_t i) {
            std::uint32_t best = g[i];
            const auto * prow = prefix.data() + i * row;
            for (std::size_t k = 0; k < end - block; ++k) {
                const auto span = grid.spans[block + k];
                const std::uint32_t c =
                    prow[span.second] - prow[span.first];
                best = std::max(best, rank_tables[k][c]);
            }
            g[i] = best;
        }, 1024);
    }

    // Min-p level by dichotomy on the shared pool.  A replicate rejects at
    // per-window level u iff its maximal rank reaches the order-statistic
    // rank of 1-u, so the rejection count is a suffix count over g.
    const auto suffix = suffix_counts(g, budget);
    auto reject_count = [&](double u) {
        return suffix[order_stat_rank(1.0 - u, budget)];
    };
    result.minp_level =
        minp_dichotomy(result.bonferroni_level, alpha, budget, reject_count);

    // Thresholds at both levels, from the same histograms.
    const std::uint64_t rank_bonf =
        order_stat_rank(1.0 - result.bonferroni_level, budget);
    const std::uint64_t rank_minp =
        order_stat_rank(1.0 - result.minp_level, budget);
    result.thresholds_bonferroni.resize(window_count);
    result.thresholds_minp.resize(window_count);
    parallel_for(window_count, [&](std::size_t w) {
        const StatTable table = make_stat_table(hists[w], stats[w]);
        result.thresholds_bonferroni[w] = table_threshold(table, rank_bonf);
        result.thresholds_minp[w] = table_threshold(table, rank_minp);
    }, 1);

    // Optional audit on an independent pool: the family-wise rejection
    // probability of the freshly calibrated min-p thresholds.
    if (options.validation_pool) {
        ensure_segment_pool(grid, regime, options, "val");
        const auto & vprefix = matrix_slot_.prefix;
        const std::size_t vrow = matrix_slot_.row;
        std::vector<std::uint8_t> rejected(budget, 0);
        parallel_for(budget, [&](std::size_t i) {
            const auto * prow = vprefix.data() + i * vrow;
            for (std::size_t w = 0; w < window_count; ++w) {
                const auto span = grid.spans[w];
                const std::uint32_t c =
                    prow[span.second] - prow[span.first];
                if (stats[w](c) > result.thresholds_minp[w]) {
                    rejected[i] = 1;
                    return;
                }
            }
        }, 1024);
        std::uint64_t hits = 0;
        for (const auto r : rejected) {
            hits += r;
        }
        result.validated_size =
            static_cast<double>(hits) / static_cast<double>(budget);
    }
    return result;
}

const GridFamilyCalibration & CalibrationEngine::grid_family(
    const WindowGrid & grid, WindowStatKind kind, const Regime & regime,
    double alpha, const CalibrationOptions & options) {
    std::lock_guard<std::mutex> lock(mutex_);
    require_level(alpha);
    require_budget(options);
    require_conditional_budget(regime, options);

    const std::string token = grid_token(grid);
    const std::string cache_key =
        "fam|" + token + "|" + window_stat_kind_id(kind) + "|" +
        regime.token() + "|a=" + fmt17(alpha) +
        "|B=" + std::to_string(options.budget) +
        "|seed=" + std::to_string(options.seed) +
        (options.validation_pool ? "|val" : "");
    if (const auto it = family_cache_.find(cache_key);
        it != family_cache_.end()) {
        return it->second;
    }

    const std::size_t window_count = grid.windows.size();
    const double u_bonf = bonferroni_level(alpha, window_count);

    StoreKey base;
    base.family = (kind == WindowStatKind::abs_lin) ? "win_abs_lin"
                                                    : "win_quad";
    base.grid = token;
    base.n = regime.conditional ? static_cast<std::int64_t>(regime.n) : -1;
    base.lambda0 = regime.conditional ? 0.0 : regime.lambda0;
    base.scale = regime.scale;
    base.budget = options.budget;
    base.seed = options.seed;

    StoreKey minp_key = base;
    minp_key.kind = "minp_level";
    minp_key.u = alpha;

    // Store-first: the query is served without simulation only when the
    // min-p level and every per-window threshold at both levels are
    // present; a partial hit recomputes everything from one fresh pool.
    GridFamilyCalibration loaded;
    bool have_all = false;
    std::string first_missing = minp_key.canonical();
    if (store_ != nullptr) {
        if (const auto minp = store_->lookup(minp_key)) {
            loaded.minp_level = *minp;
            loaded.thresholds_bonferroni.resize(window_count);
            loaded.thresholds_minp.resize(window_count);
            have_all = true;
            for (std::size_t w = 0; w < window_count && have_all; ++w) {
                StoreKey key = base;
                key.kind = "quantile";
                key.window = static_cast<std::int64_t>(w);
                key.u = 1.0 - u_bonf;
                if (const auto hit = store_->lookup(key)) {
                    loaded.thresholds_bonferroni[w] = *hit;
                } else {
                    have_all = false;
                    first_missing = key.canonical();
                    break;
                }
                key.u = 1.0 - loaded.minp_level;
                if (const auto hit = store_->lookup(key)) {
                    loaded.thresholds_minp[w] = *hit;
                } else {
                    have_all = false;
                    first_missing = key.canonical();
                }
            }
        }
    }

    GridFamilyCalibration result;
    if (have_all) {
        result = std::move(loaded);
        result.grid = grid;
        result.kind = kind;
        result.regime = regime;
        result.alpha = alpha;
        result.bonferroni_level = u_bonf;
        append_budget_warnings(options, result.warnings);
        if (options.validation_pool) {
            result.warnings.push_back(
                "validation pool skipped: thresholds were served from the "
                "persistent store");
        }
    } else {
        if (!options.allow_compute) {
            throw CalibrationRequiredError(
                "missing calibration record: " + first_missing +
                "; run the calibrate step first or allow on-the-fly "
                "calibration");
        }
        result = compute_grid_family(grid, kind, regime, alpha, options);
        if (store_ != nullptr) {
            auto put = [&](const StoreKey & key, double value) {
                if (!store_->lookup(key)) {
                    store_->record(key, value);
                }
            };
            put(minp_key, result.minp_level);
            for (std::size_t w = 0; w < window_count; ++w) {
                StoreKey key = base;
                key.kind = "quantile";
                key.window = static_cast<std::int64_t>(w);
                key.u = 1.0 - result.bonferroni_level;
                put(key, result.thresholds_bonferroni[w]);
                key.u = 1.0 - result.minp_level;
                put(key, result.thresholds_minp[w]);
            }
        }
    }
    auto [it, inserted] =
        family_cache_.emplace(cache_key, std::move(result));
    return it->second;
}

// ============================================================================
// Scanning extrema (continuum scan at a fixed window length)
// ============================================================================

ScanExtremaCalibration CalibrationEngine::compute_scan_extrema(
    double ell, const Regime & regime, double alpha,
    const CalibrationOptions & options) {
    const std::uint64_t budget = options.budget;

    ScanExtremaCalibration result;
    result.ell = ell;
    result.regime = regime;
    result.alpha = alpha;
    result.bonferroni_level = alpha / 2.0;
    append_budget_warnings(options, result.warnings);

    const std::string tag = "eventpool|" + regime.token();
    const Rng base(options.seed);
    std::vector<std::uint32_t> maxs(budget);
    std::vector<std::uint32_t> mins(budget);
    parallel_for(budget, [&](std::size_t i) {
        Rng rng = base.substream(tag, i);
        const EventSample sample = draw_sample(rng, regime);
        maxs[i] =
            static_cast<std::uint32_t>(window_max_count(sample, ell).count);
        mins[i] =
            static_cast<std::uint32_t>(window_min_count(sample, ell).count);
    });
    std::vector<std::uint32_t> sorted_max = maxs;
    std::vector<std::uint32_t> sorted_min = mins;
    std::sort(sorted_max.begin(), sorted_max.end());
    std::sort(sorted_min.begin(), sorted_min.end());

    auto upper_at = [&](double level) {
        return static_cast<double>(
            sorted_max[order_stat_rank(1.0 - level, budget) - 1]);
    };
    auto lower_at = [&](double level) {
        return static_cast<double>(
            sorted_min[order_stat_rank(level, budget) - 1]);
    };
    result.upper_bonferroni = upper_at(result.bonferroni_level);
    result.lower_bonferroni = lower_at(result.bonferroni_level);

    // Exceedance ranks: max_i > upper(1-u) iff #{j: max_j < max_i} reaches
    // the rank of 1-u; min_i < lower(u) iff #{j: min_j <= min_i} stays
    // strictly below the rank of u.  Both are exact under ties.
    std::vector<std::uint64_t> lt_max(budget);
    std::vector<std::uint64_t> le_min(budget);
    parallel_for(budget, [&](std::size_t i) {
        lt_max[i] = static_cast<std::uint64_t>(
            std::lower_bound(sorted_max.begin(), sorted_max.end(), maxs[i]) -
            sorted_max.begin());
        le_min[i] = static_cast<std::uint64_t>(
            std::upper_bound(sorted_min.begin(), sorted_min.end(), mins[i]) -
            sorted_min.begin());
    }, 1024);
    auto reject_count = [&](double u) {
        const std::uint64_t rank_up = order_stat_rank(1.0 - u, budget);
        const std::uint64_t rank_lo = order_stat_rank(u, budget);
        std::uint64_t count = 0;
        for (std::uint64_t i = 0; i < budget; ++i) {
            if (lt_max[i] >= rank_up || le_min[i] < rank_lo) {
                ++count;
            }
        }
        return count;
    };
    result.minp_level =
        minp_dichotomy(result.bonferroni_level, alpha, budget, reject_count);
    result.upper_minp = upper_at(result.minp_level);
    result.lower_minp = lower_at(result.minp_level);
    return result;
}

const ScanExtremaCalibration & CalibrationEngine::scan_extrema(
    double ell, const Regime & regime, double alpha,
    const CalibrationOptions & options) {
    std::lock_guard<std::mutex> lock(mutex_);
    require_level(alpha);
    require_budget(options);
    require_conditional_budget(regime, options);
    if (!(ell > 0.0) || !(ell <= 1.0)) {
        throw InvalidParameterError(
            "the scanned window length must lie in (0, 1], got " +
            std::to_string(ell));
    }

    const std::string cache_key =
        "scan|ell=" + fmt17(ell) + "|" + regime.token() + "|a=" +
        fmt17(alpha) + "|B=" + std::to_string(options.budget) +
        "|seed=" + std::to_string(options.seed);
    if (const auto it = scan_cache_.find(cache_key);
        it != scan_cache_.end()) {
        return it->second;
    }

    StoreKey base;
    base.family = "scan_extrema";
    base.grid = "ell=" + fmt17(ell);
    base.n = regime.conditional ? static_cast<std::int64_t>(regime.n) : -1;
    base.lambda0 = regime.conditional ? 0.0 : regime.lambda0;
    base.scale = regime.scale;
    base.budget = options.budget;
    base.seed = options.seed;

    StoreKey minp_key = base;
    minp_key.kind = "minp_level";
    minp_key.u = alpha;

    const double u_bonf = alpha / 2.0;
    ScanExtremaCalibration result;
    bool have_all = false;
    std::string first_missing = minp_key.canonical();
    if (store_ != nullptr) {
        if (const auto minp = store_->lookup(minp_key)) {
            result.minp_level = *minp;
            have_all = true;
            auto fetch = [&](std::int64_t window, double u, double & out) {
                if (!have_all) {
                    return;
                }
                StoreKey key = base;
                key.kind = "sup_quantile";
                key.window = window;
                key.u = u;
                if (const auto hit = store_->lookup(key)) {
                    out = *hit;
                } else {
                    have_all = false;
                    first_missing = key.canonical();
                }
            };
            fetch(0, 1.0 - u_bonf, result.upper_bonferroni);
            fetch(1, u_bonf, result.lower_bonferroni);
            fetch(0, 1.0 - result.minp_level, result.upper_minp);
            fetch(1, result.minp_level, result.lower_minp);
        }
    }
    if (have_all) {
        result.ell = ell;
        result.regime = regime;
        result.alpha = alpha;
        result.bonferroni_level = u_bonf;
        append_budget_warnings(options, result.warnings);
    } else {
        if (!options.allow_compute) {
            throw CalibrationRequiredError(
                "missing calibration record: " + first_missing +
                "; run the calibrate step first or allow on-the-fly "
                "calibration");
        }
        result = compute_scan_extrema(ell, regime, alpha, options);
        if (store_ != nullptr) {
            auto put = [&](const StoreKey & key, double value) {
                if (!store_->lookup(key)) {
                    store_->record(key, value);
                }
            };
            put(minp_key, result.minp_level);
            auto put_quantile = [&](std::int64_t window, double u,
                                    double value) {
                StoreKey key = base;
                key.kind = "sup_quantile";
                key.window = window;
                key.u = u;
                put(key, value);
            };
            put_quantile(0, 1.0 - u_bonf, result.upper_bonferroni);
            put_quantile(1, u_bonf, result.lower_bonferroni);
            put_quantile(0, 1.0 - result.minp_level, result.upper_minp);
            put_quantile(1, result.minp_level, result.lower_minp);
        }
    }
    auto [it, inserted] = scan_cache_.emplace(cache_key, std::move(result));
    return it->second;
}

double CalibrationEngine::scan_max_quantile(
    double ell, const Regime & regime, double u,
    const CalibrationOptions & options) {
    std::lock_guard<std::mutex> lock(mutex_);
    require_level(u);
    require_budget(options);
    require_conditional_budget(regime, options);
    if (!(ell > 0.0) || !(ell <= 1.0)) {
        throw InvalidParameterError(
            "the scanned window length must lie in (0, 1], got " +
            std::to_string(ell));
    }
    StoreKey key;
    key.kind = "sup_quantile";
    key.family = "scan_extrema";
    key.grid = "ell=" + fmt17(ell);
    key.window = 0;
    key.n = regime.conditional ? static_cast<std::int64_t>(regime.n) : -1;
    key.lambda0 = regime.conditional ? 0.0 : regime.lambda0;
    key.scale = regime.scale;
    key.u = u;
    key.budget = options.budget;
    key.seed = options.seed;
    return scalar_quantile(key, options, [&]() {
        const std::uint64_t budget = options.budget;
        const std::string tag = "eventpool|" + regime.token();
        const Rng base(options.seed);
        std::vector<std::uint32_t> pool(budget);
        parallel_for(budget, [&](std::size_t i) {
            Rng rng = base.substream(tag, i);
            const EventSample sample = draw_sample(rng, regime);
            pool[i] = static_cast<std::uint32_t>(
                window_max_count(sample, ell).count);
        });
        const std::uint64_t rank = order_stat_rank(u, budget);
        std::nth_element(pool.begin(),
                         pool.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                         pool.end());
        return static_cast<double>(pool[rank - 1]);
    });
}

double CalibrationEngine::scan_min_quantile(
    double ell, const Regime & regime, double u,
    const CalibrationOptions & options) {
    std::lock_guard<std::mutex> lock(mutex_);
    require_level(u);
    require_budget(options);
    require_conditional_budget(regime, options);
    if (!(ell > 0.0) || !(ell <= 1.0)) {
        throw InvalidParameterError(
            "the scanned window length must lie in (0, 1], got " +
            std::to_string(ell));
    }
    StoreKey key;
    key.kind = "sup_quantile";
    key.family = "scan_extrema";
    key.grid = "ell=" + fmt17(ell);
    key.window = 1;
    key.n = regime.conditional ? static_cast<std::int64_t>(regime.n) : -1;
    key.lambda0 = regime.conditional ? 0.0 : regime.lambda0;
    key.scale = regime.scale;
    key.u = u;
    key.budget = options.budget;
    key.seed = options.seed;
    return scalar_quantile(key, options, [&]() {
        const std::uint64_t budget = options.budget;
        const std::string tag = "eventpool|" + regime.token();
        const Rng base(options.seed);
        std::vector<std::uint32_t> pool(budget);
        parallel_for(budget, [&](std::size_t i) {
            Rng rng = base.substream(tag, i);
            const EventSample sample = draw_sample(rng, regime);
            pool[i] = static_cast<std::uint32_t>(
                window_min_count(sample, ell).count);
        });
        const std::uint64_t rank = order_stat_rank(u, budget);
        std::nth_element(pool.begin(),
                         pool.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                         pool.end());
        return static_cast<double>(pool[rank - 1]);
    });
}

// ============================================================================
// Supremum quantiles
// ============================================================================

double CalibrationEngine::sup_length_quantile(
    double tau_star, double delta_star, const Regime & regime, double u,
    const CalibrationOptions & options) {
    std::lock_guard<std::mutex> lock(mutex_);
    require_level(u);
    require_budget(options);
    require_conditional_budget(regime, options);
    StoreKey key;
    key.kind = "sup_quantile";
    key.family = "sup_shift_length";
    key.grid = "tau_star=" + fmt17(tau_star) +
               ",delta_star=" + fmt17(delta_star);
    key.n = regime.conditional ? static_cast<std::int64_t>(regime.n) : -1;
    key.lambda0 = regime.conditional ? 0.0 : regime.lambda0;
    key.scale = regime.scale;
    key.u = u;
    key.budget = options.budget;
    key.seed = options.seed;
    return scalar_quantile(key, options, [&]() {
        const std::uint64_t budget = options.budget;
        const std::string tag = "eventpool|" + regime.token();
        const Rng base(options.seed);
        std::vector<double> pool(budget);
        parallel_for(budget, [&](std::size_t i) {
            Rng rng = base.substream(tag, i);
            const EventSample sample = draw_sample(rng, regime);
            pool[i] = sup_shifted_over_length(sample, tau_star, delta_star,
                                              !regime.conditional,
                                              regime.lambda0)
                          .value;
        });
        const std::uint64_t rank = order_stat_rank(u, budget);
        std::nth_element(pool.begin(),
                         pool.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                         pool.end());
        return pool[rank - 1];
    });
}

double CalibrationEngine::sup_location_quantile(
    double delta_star, const Regime & regime, double u,
    const CalibrationOptions & options) {
    std::lock_guard<std::mutex> lock(mutex_);
    require_level(u);
    require_budget(options);
    require_conditional_budget(regime, options);
    StoreKey key;
    key.kind = "sup_quantile";
    key.family = "sup_shift_location";
    key.grid = "delta_star=" + fmt17(delta_star);
    key.n = regime.conditional ? static_cast<std::int64_t>(regime.n) : -1;
    key.lambda0 = regime.conditional ? 0.0 : regime.lambda0;
    key.scale = regime.scale;
    key.u = u;
    key.budget = options.budget;
    key.seed = options.seed;
    return scalar_quantile(key, options, [&]() {
        const std::uint64_t budget = options.budget;
        const std::string tag = "eventpool|" + regime.token();
        const Rng base(options.seed);
        std::vector<double> pool(budget);
        parallel_for(budget, [&](std::size_t i) {
            Rng rng = base.substream(tag, i);
            const EventSample sample = draw_sample(rng, regime);
            pool[i] = sup_shifted_over_location(sample, delta_star,
                                                !regime.conditional,
                                                regime.lambda0)
                          .value;
        });
        const std::uint64_t rank = order_stat_rank(u, budget);
        std::nth_element(pool.begin(),
                         pool.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                         pool.end());
        return pool[rank - 1];
    });
}

// ============================================================================
// Single-window and Laplace quantiles
// ============================================================================

double CalibrationEngine::window_stat_quantile(
    double tau1, double tau2, WindowStatKind kind, const Regime & regime,
    double u, const CalibrationOptions & options) {
    require_level(u);
    const WindowGrid grid = single_window_grid(tau1, tau2);
    // The u-quantile of the statistic is the Bonferroni threshold of the
    // one-window family at level 1 - u (one window, so no correction).
    return grid_family(grid, kind, regime, 1.0 - u, options)
        .thresholds_bonferroni[0];
}

double CalibrationEngine::laplace_sum_quantile(
    std::uint64_t n, double u, const CalibrationOptions & options) {
    std::lock_guard<std::mutex> lock(mutex_);
    require_level(u);
    require_budget(options);
    if (n == 0) {
        return 0.0;
    }
    if (n == 1) {
        return u;
    }
    if (n > options.max_conditional_n) {
        throw BudgetError(
            "Laplace reference quantile at total count n = " +
            std::to_string(n) +
            " exceeds the configured bound max_conditional_n = " +
            std::to_string(options.max_conditional_n));
    }
    StoreKey key;
    key.kind = "quantile";
    key.family = "laplace_sum";
    key.n = static_cast<std::int64_t>(n);
    key.u = u;
    key.budget = options.budget;
    key.seed = options.seed;
    return scalar_quantile(key, options, [&]() {
        const std::uint64_t budget = options.budget;
        const std::string tag = "laplacepool|n=" + std::to_string(n);
        const Rng base(options.seed);
        std::vector<double> pool(budget);
        parallel_for(budget, [&](std::size_t i) {
            Rng rng = base.substream(tag, i);
            double sum = 0.0;
            for (std::uint64_t k = 0; k < n; ++k) {
                sum += rng.uniform_left_open();
            }
            pool[i] = sum;
        });
        const std::uint64_t rank = order_stat_rank(u, budget);
        std::nth_element(pool.begin(),
                         pool.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                         pool.end());
        return pool[rank - 1];
    });
}

}  // namespace pcd
