#pragma once

/**
 * @file grids.hpp
 * @brief Window collections scanned by the multi-window detectors.
 *
 * A WindowGrid is an ordered collection of half-open windows (tau1, tau2]
 * together with the sorted cut points of all window endpoints (always
 * including 0 and 1).  The cut points tile (0, 1] into segments; every
 * window is a contiguous run of segments, so window counts reduce to prefix
 * sums of segment counts.  This is what makes Monte-Carlo calibration of
 * thousands of windows cheap: a replicate is just a vector of segment
 * counts.
 *
 * Named presets cover the standard collections:
 *   - theta_d    : right-anchored windows (tau, 1] at tau = 1 - 2^-k,
 *                  k = 1..floor(log2 L);
 *   - theta_r    : right-anchored windows at tau = k/10, k = 1..9;
 *   - theta_d_u  : right-anchored windows at tau in {2^-k, k = 2..K} union
 *                  {1 - 2^-k, k = 1..K}, K = floor(log2 L) (the dyadic
 *                  collection adapted to an unknown baseline, probing both
 *                  ends);
 *   - theta_r_u  : same as theta_r;
 *   - theta_1    : the full triangle of windows (k/M, (k+k')/M] with
 *                  M = ceil(L);
 *   - theta_2    : the triangle with M = ceil(L / log L), minus the full
 *                  window (0, 1] (on which the conditional quadratic
 *                  statistic is undefined).
 *
 * Detector-specific collections (dyadic lengths anchored at tau_star,
 * shifted scanning windows of a fixed length) have their own builders.
 */

#include <cstdint>
#include <string>
#include <vector>

namespace pcd {

/// One half-open window (tau1, tau2].
struct GridWindow {
    double tau1 = 0.0;
    double tau2 = 1.0;
};

/// A window collection with its segment decomposition.
struct WindowGrid {
    std::string id;                    ///< stable identifier for store keys
    std::vector<GridWindow> windows;   ///< the scanned windows, in order
    std::vector<double> cuts;          ///< sorted cut points, cuts[0] = 0,
                                       ///< cuts.back() = 1
    /// Per window: the half-open segment index range [first, last) such that
    /// the window count equals prefix[last] - prefix[first].
    std::vector<std::pair<std::uint32_t, std::uint32_t>> spans;

    [[nodiscard]] std::size_t size() const noexcept { return windows.size(); }
    [[nodiscard]] std::size_t segment_count() const noexcept {
        return cuts.size() - 1;
    }
};

/// Named window collection presets.
enum class GridPreset {
    theta_d,
    theta_r,
    theta_d_u,
    theta_r_u,
    theta_1,
    theta_2,
};

/// The preset's identifier ("theta_d", ...).
[[nodiscard]] const char * grid_preset_id(GridPreset preset);

/// Parses a preset identifier; throws InvalidParameterError on unknown ids.
[[nodiscard]] GridPreset grid_preset_from_id(const std::string & id);

/**
 * @brief Builds a named preset at observation scale L.
 *
 * Throws UnsupportedScaleError for L < 3: the dyadic collections need
 * floor(log2 L) >= 1 with a usable two-sided variant, and no multi-window
 * procedure here is meaningful below that scale.
 */
[[nodiscard]] WindowGrid make_grid(GridPreset preset, double scale);

/// Right-anchored windows (tau, 1] for explicitly given change points.
[[nodiscard]] WindowGrid location_grid(const std::string & id,
                                       const std::vector<double> & taus);

/**
 * @brief Shifted scanning windows (k/M, k/M + ell_star] of a fixed length.
 *
 * M = ceil(2 / ell_star) for a known baseline and
 * M = ceil(2 / (ell_star (1 - ell_star))) for the conditional variant;
 * k runs over 0..ceil((1 - ell_star) M) - 1.
 */
[[nodiscard]] WindowGrid shifted_window_grid(double ell_star,
                                             bool known_baseline);

/// Dyadic-length windows (tau_star, tau_star + (1 - tau_star) 2^-k] for
/// k = 1..floor(log2 L).  Throws UnsupportedScaleError for L < 3.
[[nodiscard]] WindowGrid dyadic_length_grid(double tau_star, double scale);

/// The triangle of windows (k/M, (k+k')/M]; optionally without the full
/// window (0, 1].
[[nodiscard]] WindowGrid triangle_grid(std::uint32_t M, bool drop_full_window);

/// A one-window grid over (tau1, tau2], for single-window calibrations.
/// Requires 0 <= tau1 < tau2 <= 1.
[[nodiscard]] WindowGrid single_window_grid(double tau1, double tau2);

/// floor(log2 scale); throws UnsupportedScaleError for scale < 3.
[[nodiscard]] std::uint32_t dyadic_depth(double scale);

/// ceil(scale / log(scale)) — the pruned-triangle resolution.
[[nodiscard]] std::uint32_t pruned_triangle_resolution(double scale);

/**
 * @brief The per-window level of the union (Bonferroni) test: alpha divided
 * by the number of windows.  Throws InvalidParameterError for alpha outside
 * (0, 1) and UnsupportedScaleError for an empty grid.
 */
[[nodiscard]] double bonferroni_level(double alpha, std::size_t window_count);

}  // namespace pcd
