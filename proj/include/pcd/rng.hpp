#pragma once

/**
 * @file rng.hpp
 * @brief Seeded random number generation with named, reproducible substreams.
 *
 * Everything stochastic in this library is driven by a single user-supplied
 * 64-bit seed.  Independent pieces of work (calibration vs. evaluation,
 * replicate i vs. replicate j, one grid family vs. another) each derive their
 * own substream from that seed plus a tag, so
 *
 *   - results are bit-reproducible for a fixed seed, and
 *   - changing the number of threads or the order of work items does not
 *     change any stream, because substreams are derived by value, never by
 *     drawing from a shared generator.
 *
 * Substream derivation uses the SplitMix64 finalizer to mix the seed with the
 * tag; the mixed value seeds a std::mt19937_64.
 */

#include <cstdint>
#include <random>
#include <string_view>

namespace pcd {

/// SplitMix64 finalizer: a cheap, high-quality 64-bit mixing function.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// FNV-1a hash of a string, used to turn textual stream tags into 64-bit
/// values for substream derivation.
[[nodiscard]] constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : text) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001B3ULL;
    }
    return h;
}

/**
 * @brief A seeded generator that can spawn independent named substreams.
 *
 * The wrapped engine is std::mt19937_64.  Substreams are derived from the
 * *derivation seed* stored at construction, not from the current engine
 * state, so spawning a substream never perturbs the parent stream and the
 * same (seed, tags...) always yields the same substream.
 */
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

    /// Derive an independent generator for the given numeric tag.
    [[nodiscard]] Rng substream(std::uint64_t tag) const {
        return Rng(mix64(seed_ ^ mix64(tag)));
    }

    /// Derive an independent generator for the given textual tag.
    [[nodiscard]] Rng substream(std::string_view tag) const {
        return substream(fnv1a64(tag));
    }

    /// Derive an independent generator for a (textual, numeric) tag pair,
    /// e.g. ("calibration", replicate index).
    [[nodiscard]] Rng substream(std::string_view tag, std::uint64_t index) const {
        return substream(fnv1a64(tag) ^ mix64(index));
    }

    /// The derivation seed this generator was built from.
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    /// Access the wrapped engine (for use with <random> distributions).
    [[nodiscard]] std::mt19937_64 & engine() noexcept { return engine_; }

    /// Uniform draw on [0, 1).
    [[nodiscard]] double uniform01() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

    /// Uniform draw on (0, 1]: event times live in a left-open interval, so
    /// placements must be able to hit 1 and never 0.
    [[nodiscard]] double uniform_left_open() { return 1.0 - uniform01(); }

    /// Poisson draw with the given mean.
    [[nodiscard]] std::uint64_t poisson(double mean) {
        return std::poisson_distribution<std::uint64_t>(mean)(engine_);
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace pcd
