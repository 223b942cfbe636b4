#pragma once

/**
 * @file event_sample.hpp
 * @brief Event samples on (0, 1], intensity profiles, simulation and I/O.
 *
 * The observation model throughout the library: a Poisson process is observed
 * on the unit interval with respect to the measure L dt, where L > 0 is the
 * observation scale.  Its intensity is piecewise constant,
 *
 *     rate(t) = baseline + height * 1{ t in (start, start + length] },
 *
 * i.e. a constant baseline with at most one abrupt change.  A persistent
 * change ("jump") is the special case length = 1 - start; a transitory change
 * ("bump") has start + length < 1.
 *
 * An EventSample stores the ordered event times, all strictly inside (0, 1]
 * (a left-open interval: time 0 can never carry an event, time 1 can).  All
 * interval counts follow the same convention: count(a, b) is the number of
 * events in the half-open interval (a, b].
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "pcd/rng.hpp"

namespace pcd {

// ============================================================================
// Intensity profiles
// ============================================================================

/**
 * @brief A constant baseline plus at most one rectangular change.
 *
 * Invariants (checked by the factory functions and validate()):
 *   - baseline > 0,
 *   - baseline + height >= 0 (the intensity must stay nonnegative),
 *   - 0 <= start < 1 and 0 < length <= 1 - start whenever height != 0.
 */
struct IntensityProfile {
    double baseline = 1.0;  ///< rate outside the changed window
    double height = 0.0;    ///< signed change height (0 means no change)
    double start = 0.0;     ///< left end of the changed window
    double length = 0.0;    ///< length of the changed window

    /// Profile with no change.
    [[nodiscard]] static IntensityProfile constant(double baseline);

    /// Persistent change: rate jumps by `height` on (start, 1].
    [[nodiscard]] static IntensityProfile jump(double baseline, double height,
                                               double start);

    /// Transitory change: rate changes by `height` on (start, start+length].
    [[nodiscard]] static IntensityProfile bump(double baseline, double height,
                                               double start, double length);

    /// Throws InvalidParameterError if any invariant is violated.
    void validate() const;

    /// Intensity at time t (t treated as a member of the half-open window).
    [[nodiscard]] double rate_at(double t) const noexcept;

    /// Integral of the rate over (a, b], for 0 <= a <= b <= 1.
    [[nodiscard]] double mass(double a, double b) const noexcept;
};

// ============================================================================
// Event samples
// ============================================================================

/**
 * @brief An ordered sample of event times on (0, 1] with its scale L.
 *
 * Construction validates every time (0 < t <= 1, finite) and sorts.  Times
 * exactly equal to 0 are rejected: the observation interval is left-open and
 * several detectors take logarithms of event times.
 */
class EventSample {
  public:
    /// Builds a sample; throws InvalidParameterError on bad scale or times.
    EventSample(double scale, std::vector<double> times);

    /// Observation scale L (> 0).
    [[nodiscard]] double scale() const noexcept { return scale_; }

    /// Total number of events.
    [[nodiscard]] std::size_t size() const noexcept { return times_.size(); }

    /// Ordered event times.
    [[nodiscard]] const std::vector<double> & times() const noexcept {
        return times_;
    }

    /**
     * @brief Number of events in the half-open interval (tau1, tau2].
     *
     * Computed by binary search in O(log n).  Throws InvalidIntervalError
     * unless 0 <= tau1 <= tau2 <= 1.
     */
    [[nodiscard]] std::uint64_t count(double tau1, double tau2) const;

    /// Number of events at or before t (binary search, no validation).
    [[nodiscard]] std::uint64_t count_up_to(double t) const noexcept;

  private:
    double scale_;
    std::vector<double> times_;
};

// ============================================================================
// Sliding-window count extrema
// ============================================================================

/// Result of an exact sliding-window count extremum search.
struct WindowExtremum {
    std::uint64_t count = 0;  ///< extremal count
    double tau = 0.0;         ///< smallest window start achieving it
};

/**
 * @brief Exact maximum of count(tau, tau+ell] over tau in [0, 1-ell].
 *
 * The count, as a function of the window start, jumps up exactly when the
 * window start reaches time(i) - ell (the window right edge lands on an
 * event) and drops when it passes an event.  The maximum is therefore
 * attained at one of the candidate starts {0} and {time(i) - ell}; these are
 * scanned in increasing order so ties resolve to the smallest start.
 * Throws InvalidParameterError unless 0 < ell <= 1.
 */
[[nodiscard]] WindowExtremum window_max_count(const EventSample & sample,
                                              double ell);

/**
 * @brief Exact minimum of count(tau, tau+ell] over tau in [0, 1-ell].
 *
 * Minima are attained at {0} and at the event times themselves (the window
 * is left-open, so at tau = time(i) the event has just been excluded).
 * Candidates are scanned in increasing order; ties resolve to the smallest
 * start.  Throws InvalidParameterError unless 0 < ell <= 1.
 */
[[nodiscard]] WindowExtremum window_min_count(const EventSample & sample,
                                              double ell);

// ============================================================================
// Simulation
// ============================================================================

/**
 * @brief Draws one event sample from the given profile at scale L.
 *
 * Count-then-place: the total number of events is Poisson with mean
 * L * mass(0, 1); each event is then placed independently by inverse-CDF
 * transform of a uniform draw on (0, 1], and the times are sorted.  The
 * output is a deterministic function of the generator state.
 *
 * Throws InvalidParameterError for invalid profiles or scale <= 0.
 */
[[nodiscard]] EventSample simulate(Rng & rng, const IntensityProfile & profile,
                                   double scale);

// ============================================================================
// Distances
// ============================================================================

/**
 * @brief Energy distance of a single change to the no-change family.
 *
 * For a change of height `height` over a window of relative length `length`:
 * |height| * sqrt(length) when the baseline is known, and
 * |height| * sqrt(length * (1 - length)) when the baseline is unknown (the
 * distance is then taken to the whole constant family).
 */
[[nodiscard]] double d2_distance(double height, double length,
                                 bool known_baseline);

// ============================================================================
// File I/O
// ============================================================================

/**
 * @brief Writes a sample as text: header line "L=<scale>" followed by one
 * event time per line, at 17 significant digits (round-trip exact).
 */
void save_events_text(const EventSample & sample,
                      const std::filesystem::path & path);

/**
 * @brief Writes a sample as JSON: {"L": <scale>, "times": [...]}.
 */
void save_events_json(const EventSample & sample,
                      const std::filesystem::path & path);

/**
 * @brief Reads a sample from either format, sniffing the leading character
 * ('{' means JSON, anything else means the text header format).
 *
 * Throws InvalidParameterError on malformed content, out-of-range times
 * (including t = 0) or a missing scale.
 */
[[nodiscard]] EventSample load_events(const std::filesystem::path & path);

/// Parses the text format from a stream (exposed for testing).
[[nodiscard]] EventSample load_events_text(std::istream & in);

/// Parses the JSON format from a stream (exposed for testing).
[[nodiscard]] EventSample load_events_json(std::istream & in);

}  // namespace pcd
