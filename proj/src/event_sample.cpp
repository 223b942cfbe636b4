/**
 * @file event_sample.cpp
 * @brief Implementation of event samples, simulation, window extrema and I/O.
 */

#include "pcd/event_sample.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pcd/errors.hpp"

namespace pcd {

namespace {

void require_finite(double value, const char * name) {
    if (!std::isfinite(value)) {
        throw InvalidParameterError(std::string(name) +
                                    " must be finite, got " +
                                    std::to_string(value));
    }
}

}  // namespace

// ============================================================================
// IntensityProfile
// ============================================================================

IntensityProfile IntensityProfile::constant(double baseline) {
    IntensityProfile profile{baseline, 0.0, 0.0, 0.0};
    profile.validate();
    return profile;
}

IntensityProfile IntensityProfile::jump(double baseline, double height,
                                        double start) {
    IntensityProfile profile{baseline, height, start, 1.0 - start};
    profile.validate();
    return profile;
}

IntensityProfile IntensityProfile::bump(double baseline, double height,
                                        double start, double length) {
    IntensityProfile profile{baseline, height, start, length};
    profile.validate();
    return profile;
}

void IntensityProfile::validate() const {
    require_finite(baseline, "baseline");
    require_finite(height, "height");
    require_finite(start, "change start");
    require_finite(length, "change length");
    if (baseline <= 0.0) {
        throw InvalidParameterError("baseline rate must be > 0, got " +
                                    std::to_string(baseline));
    }
    if (baseline + height < 0.0) {
        throw InvalidParameterError(
            "baseline + change height must be >= 0 (the intensity cannot go "
            "negative); got baseline " +
            std::to_string(baseline) + " and height " +
            std::to_string(height));
    }
    if (height != 0.0) {
        if (start < 0.0 || start >= 1.0) {
            throw InvalidParameterError(
                "change start must lie in [0, 1), got " +
                std::to_string(start));
        }
        if (length <= 0.0 || start + length > 1.0 + 1e-12) {
            throw InvalidParameterError(
                "change length must lie in (0, 1 - start]; got start " +
                std::to_string(start) + " and length " +
                std::to_string(length));
        }
    }
}

double IntensityProfile::rate_at(double t) const noexcept {
    const bool inside = (t > start) && (t <= start + length);
    return baseline + (inside ? height : 0.0);
}

double IntensityProfile::mass(double a, double b) const noexcept {
    const double base = baseline * (b - a);
    const double lo = std::max(a, start);
    const double hi = std::min(b, start + length);
    const double overlap = std::max(0.0, hi - lo);
    return base + height * overlap;
}

// ============================================================================
// EventSample
// ============================================================================

EventSample::EventSample(double scale, std::vector<double> times)
    : scale_(scale), times_(std::move(times)) {
    require_finite(scale_, "scale L");
    if (scale_ <= 0.0) {
        throw InvalidParameterError("scale L must be > 0, got " +
                                    std::to_string(scale_));
    }
    for (double t : times_) {
        if (!std::isfinite(t) || t <= 0.0 || t > 1.0) {
            throw InvalidParameterError(
                "event times must lie in (0, 1] (left-open: a time of "
                "exactly 0 is not representable); got " +
                std::to_string(t));
        }
    }
    std::sort(times_.begin(), times_.end());
}

std::uint64_t EventSample::count_up_to(double t) const noexcept {
    return static_cast<std::uint64_t>(
        std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
}

std::uint64_t EventSample::count(double tau1, double tau2) const {
    if (!(tau1 >= 0.0) || !(tau2 <= 1.0) || !(tau1 <= tau2)) {
        throw InvalidIntervalError(
            "count requires 0 <= tau1 <= tau2 <= 1; got tau1 = " +
            std::to_string(tau1) + ", tau2 = " + std::to_string(tau2));
    }
    return count_up_to(tau2) - count_up_to(tau1);
}

// ============================================================================
// Window extrema
// ============================================================================

namespace {

void require_window_length(double ell) {
    if (!std::isfinite(ell) || ell <= 0.0 || ell > 1.0) {
        throw InvalidParameterError("window length must lie in (0, 1], got " +
                                    std::to_string(ell));
    }
}

}  // namespace

WindowExtremum window_max_count(const EventSample & sample, double ell) {
    require_window_length(ell);
    const auto & times = sample.times();

    // Candidate 0: the window (0, ell].
    WindowExtremum best{sample.count_up_to(ell), 0.0};

    // Candidates time(i) - ell, scanned in increasing order of time(i).  The
    // window right edge then sits exactly on the event, so the count is
    // evaluated as (# events <= time(i)) - (# events <= time(i) - ell): this
    // keeps the anchor event inside the window even when time(i) - ell is
    // not exactly representable.
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        if (t < ell) {
            continue;  // the anchored window would start before 0
        }
        const double tau = std::max(0.0, t - ell);
        const std::uint64_t count =
            sample.count_up_to(t) - sample.count_up_to(tau);
        if (count > best.count) {
            best = WindowExtremum{count, tau};
        }
    }
    return best;
}

WindowExtremum window_min_count(const EventSample & sample, double ell) {
    require_window_length(ell);
    const auto & times = sample.times();

    auto window_count = [&](double tau) {
        return sample.count_up_to(std::min(tau + ell, 1.0)) -
               sample.count_up_to(tau);
    };

    // Candidate 0, then each event time <= 1 - ell (at tau = time(i) the
    // event has just left the left-open window), then the right boundary.
    WindowExtremum best{window_count(0.0), 0.0};
    for (double t : times) {
        if (t > 1.0 - ell) {
            break;
        }
        const std::uint64_t count = window_count(t);
        if (count < best.count) {
            best = WindowExtremum{count, t};
        }
    }
    const double right = 1.0 - ell;
    if (right > 0.0) {
        const std::uint64_t count = window_count(right);
        if (count < best.count) {
            best = WindowExtremum{count, right};
        }
    }
    return best;
}

// ============================================================================
// Simulation
// ============================================================================

namespace {

/// Inverse of the normalized cumulative intensity: maps u in (0, 1] to the
/// smallest t with mass(0, t) >= u * mass(0, 1).  The cumulative mass is
/// piecewise linear with at most three pieces, so the inverse is explicit.
double inverse_cumulative(const IntensityProfile & profile, double total,
                          double u) {
    const double target = u * total;
    const double mass_before = profile.mass(0.0, profile.start);
    const double change_end = profile.start + profile.length;
    const double mass_through =
        profile.height == 0.0 ? mass_before : profile.mass(0.0, change_end);

    if (target <= mass_before || profile.height == 0.0) {
        return target / profile.baseline;
    }
    const double inside_rate = profile.baseline + profile.height;
    if (target <= mass_through) {
        if (inside_rate == 0.0) {
            // A zero-intensity stretch carries no mass; only target ==
            // mass_before can land here, at the left edge of the window.
            return profile.start;
        }
        return profile.start + (target - mass_before) / inside_rate;
    }
    return change_end + (target - mass_through) / profile.baseline;
}

}  // namespace

EventSample simulate(Rng & rng, const IntensityProfile & profile,
                     double scale) {
    profile.validate();
    require_finite(scale, "scale L");
    if (scale <= 0.0) {
        throw InvalidParameterError("scale L must be > 0, got " +
                                    std::to_string(scale));
    }
    const double total = profile.mass(0.0, 1.0);
    const std::uint64_t n = rng.poisson(scale * total);
    std::vector<double> times;
    times.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const double u = rng.uniform_left_open();
        double t = inverse_cumulative(profile, total, u);
        t = std::min(std::max(t, std::numeric_limits<double>::min()), 1.0);
        times.push_back(t);
    }
    return EventSample(scale, std::move(times));
}

// ============================================================================
// Distances
// ============================================================================

double d2_distance(double height, double length, bool known_baseline) {
    require_finite(height, "change height");
    require_finite(length, "change length");
    if (length < 0.0 || length > 1.0) {
        throw InvalidParameterError("change length must lie in [0, 1], got " +
                                    std::to_string(length));
    }
    const double factor = known_baseline ? length : length * (1.0 - length);
    return std::abs(height) * std::sqrt(factor);
}

// ============================================================================
// File I/O
// ============================================================================

namespace {

[[noreturn]] void malformed(const std::string & detail) {
    throw InvalidParameterError("malformed event file: " + detail);
}

}  // namespace

void save_events_text(const EventSample & sample,
                      const std::filesystem::path & path) {
    std::ofstream out(path);
    if (!out) {
        throw InvalidParameterError("cannot open '" + path.string() +
                                    "' for writing");
    }
    out << std::setprecision(17);
    out << "L=" << sample.scale() << "\n";
    for (double t : sample.times()) {
        out << t << "\n";
    }
    if (!out) {
        throw InvalidParameterError("write to '" + path.string() + "' failed");
    }
}

void save_events_json(const EventSample & sample,
                      const std::filesystem::path & path) {
    nlohmann::json j;
    j["L"] = sample.scale();
    j["times"] = sample.times();
    std::ofstream out(path);
    if (!out) {
        throw InvalidParameterError("cannot open '" + path.string() +
                                    "' for writing");
    }
    out << j.dump(2) << "\n";
    if (!out) {
        throw InvalidParameterError("write to '" + path.string() + "' failed");
    }
}

EventSample load_events_text(std::istream & in) {
    std::string header;
    if (!std::getline(in, header)) {
        malformed("empty input, expected an 'L=<scale>' header line");
    }
    if (header.rfind("L=", 0) != 0) {
        malformed("line 1 must be 'L=<scale>', got '" + header + "'");
    }
    double scale = 0.0;
    try {
        std::size_t consumed = 0;
        scale = std::stod(header.substr(2), &consumed);
        if (consumed != header.size() - 2) {
            malformed("line 1: trailing characters after the scale in '" +
                      header + "'");
        }
    } catch (const std::logic_error &) {
        malformed("line 1: cannot parse the scale in '" + header + "'");
    }
    std::vector<double> times;
    std::string line;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) {
            continue;
        }
        const std::string where = "line " + std::to_string(line_number);
        try {
            std::size_t consumed = 0;
            times.push_back(std::stod(line, &consumed));
            if (consumed != line.size()) {
                malformed(where + ": trailing characters on event line '" +
                          line + "'");
            }
        } catch (const std::logic_error &) {
            malformed(where + ": cannot parse event time '" + line + "'");
        }
    }
    return EventSample(scale, std::move(times));
}

EventSample load_events_json(std::istream & in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error & e) {
        malformed(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("L") || !j.contains("times")) {
        malformed("JSON object must have keys \"L\" and \"times\"");
    }
    if (!j["L"].is_number() || !j["times"].is_array()) {
        malformed("\"L\" must be a number and \"times\" an array");
    }
    std::vector<double> times;
    times.reserve(j["times"].size());
    for (const auto & item : j["times"]) {
        if (!item.is_number()) {
            malformed("every entry of \"times\" must be a number");
        }
        times.push_back(item.get<double>());
    }
    return EventSample(j["L"].get<double>(), std::move(times));
}

EventSample load_events(const std::filesystem::path & path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidParameterError("cannot open '" + path.string() +
                                    "' for reading");
    }
    // Sniff the first non-whitespace character: '{' means JSON.
    int c = in.peek();
    while (c != std::char_traits<char>::eof() &&
           std::isspace(static_cast<unsigned char>(c)) != 0) {
        in.get();
        c = in.peek();
    }
    if (c == '{') {
        return load_events_json(in);
    }
    return load_events_text(in);
}

}  // namespace pcd
