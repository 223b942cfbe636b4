#pragma once

/**
 * @file store.hpp
 * @brief Persistent memoization of Monte-Carlo calibration results.
 *
 * The store is an append-only JSON-lines file.  Each line is one record:
 *
 *   {"v":1,"fp":"<16 hex digits>","kind":"quantile","family":"...",
 *    "grid":"...","window":3,"n":-1,"lambda0":1.0,"L":100.0,"u":0.025,
 *    "B":200000,"seed":7,"value":12.0}
 *
 * The canonical key of a record is the deterministic string rendering of
 * every field except "value"; "fp" is the FNV-1a-64 hash of that key, kept
 * redundantly so corruption and hash collisions can be audited at load
 * time.  Unknown record versions are skipped (forward compatibility);
 * records whose stored fingerprint does not match their recomputed key are
 * rejected with an error.
 *
 * Kinds:
 *   - "quantile":     a per-window Monte-Carlo critical value at level u;
 *   - "sup_quantile": the critical value of an aggregated (supremum or
 *                     extremum) statistic;
 *   - "minp_level":   the calibrated common per-window level of a min-p
 *                     adjusted multi-window test.
 */

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace pcd {

/// The full identifying key of one stored critical value.
struct StoreKey {
    std::string kind;      ///< "quantile", "sup_quantile" or "minp_level"
    std::string family;    ///< detector family identifier
    std::string grid;      ///< window-collection identifier ("" if not gridded)
    std::int64_t window = -1;  ///< window index within the grid, -1 if none
    std::int64_t n = -1;   ///< conditioning total count, -1 for unconditional
    double lambda0 = 0.0;  ///< baseline rate (0 for conditional records)
    double scale = 0.0;    ///< observation scale L
    double u = 0.0;        ///< level the value was computed at
    std::uint64_t budget = 0;  ///< Monte-Carlo replications B
    std::uint64_t seed = 0;    ///< calibration seed

    /// Deterministic canonical rendering (doubles at 17 significant digits).
    [[nodiscard]] std::string canonical() const;

    /// FNV-1a-64 fingerprint of canonical(), as 16 lowercase hex digits.
    [[nodiscard]] std::string fingerprint() const;
};

/**
 * @brief Thread-safe JSON-lines store with an in-memory index.
 *
 * Construction loads and audits any existing file.  record() appends to the
 * file immediately (flushed), so results survive crashes and can be shared
 * across processes that run sequentially.  An empty path keeps the store
 * purely in memory.
 */
class CriticalValueStore {
  public:
    /// Opens (or lazily creates) the store file; empty path = memory only.
    explicit CriticalValueStore(std::filesystem::path path = {});

    /// Looks up a value by key; std::nullopt on a miss.
    [[nodiscard]] std::optional<double> lookup(const StoreKey & key) const;

    /// Records a value, appending to the backing file if one is configured.
    /// Re-recording the same key overwrites the in-memory value.
    void record(const StoreKey & key, double value);

    /// Number of records currently indexed.
    [[nodiscard]] std::size_t size() const;

    /// The backing file ("" for a memory-only store).
    [[nodiscard]] const std::filesystem::path & path() const noexcept {
        return path_;
    }

  private:
    void load();

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<std::string, double> values_;  // canonical key -> value
};

}  // namespace pcd
