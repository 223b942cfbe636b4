/**
 * @file statistics.cpp
 * @brief Implementation of window statistics, supremum evaluators and
 *        moment formulas.
 */

#include "pcd/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pcd/errors.hpp"

namespace pcd {

namespace {

void require_window(double tau1, double tau2) {
    if (!(tau1 >= 0.0) || !(tau2 <= 1.0) || !(tau1 < tau2)) {
        throw InvalidIntervalError(
            "statistic window requires 0 <= tau1 < tau2 <= 1; got tau1 = " +
            std::to_string(tau1) + ", tau2 = " + std::to_string(tau2));
    }
}

void require_rate(double lambda0) {
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) {
        throw InvalidParameterError("baseline rate must be > 0, got " +
                                    std::to_string(lambda0));
    }
}

double require_height(double delta_star) {
    if (delta_star == 0.0 || !std::isfinite(delta_star)) {
        throw InvalidParameterError(
            "prescribed change height delta_star must be nonzero and "
            "finite, got " +
            std::to_string(delta_star));
    }
    return delta_star > 0.0 ? 1.0 : -1.0;
}

}  // namespace

// ============================================================================
// Count-level kernels
// ============================================================================

double lin_kernel_known(double count, double rho, double lambda0,
                        double scale) {
    return count - lambda0 * rho * scale;
}

double quad_kernel_known(double count, double rho, double lambda0,
                         double scale) {
    return (count * count - count) / (scale * scale * rho) -
           2.0 * lambda0 * count / scale + lambda0 * lambda0 * rho;
}

double lin_kernel_cond(double count, double rho, double total) {
    return count - rho * total;
}

double quad_kernel_cond(double inside, double outside, double rho,
                        double scale) {
    const double a = rho / (1.0 - rho);
    const double b = (1.0 - rho) / rho;
    return (a * (outside * outside - outside) +
            b * (inside * inside - inside) - 2.0 * outside * inside) /
           (scale * scale);
}

// ============================================================================
// Known-baseline statistics
// ============================================================================

double lin_stat_known(const EventSample & sample, double tau1, double tau2,
                      double lambda0) {
    require_window(tau1, tau2);
    require_rate(lambda0);
    const double c = static_cast<double>(sample.count(tau1, tau2));
    return lin_kernel_known(c, tau2 - tau1, lambda0, sample.scale());
}

double shifted_stat_known(const EventSample & sample, double tau1,
                          double tau2, double lambda0, double delta_star) {
    const double sgn = require_height(delta_star);
    const double lin = lin_stat_known(sample, tau1, tau2, lambda0);
    return sgn * lin -
           std::abs(delta_star) * sample.scale() * (tau2 - tau1) / 2.0;
}

double quad_stat_known(const EventSample & sample, double tau1, double tau2,
                       double lambda0) {
    require_window(tau1, tau2);
    require_rate(lambda0);
    const double c = static_cast<double>(sample.count(tau1, tau2));
    return quad_kernel_known(c, tau2 - tau1, lambda0, sample.scale());
}

// ============================================================================
// Conditional statistics
// ============================================================================

double lin_stat_cond(const EventSample & sample, double tau1, double tau2) {
    require_window(tau1, tau2);
    const double c = static_cast<double>(sample.count(tau1, tau2));
    const double total = static_cast<double>(sample.size());
    return lin_kernel_cond(c, tau2 - tau1, total);
}

double shifted_stat_cond(const EventSample & sample, double tau1, double tau2,
                         double delta_star) {
    const double sgn = require_height(delta_star);
    const double lin = lin_stat_cond(sample, tau1, tau2);
    const double rho = tau2 - tau1;
    return sgn * lin -
           std::abs(delta_star) * sample.scale() * rho * (1.0 - rho) / 2.0;
}

double quad_stat_cond(const EventSample & sample, double tau1, double tau2) {
    require_window(tau1, tau2);
    const double rho = tau2 - tau1;
    if (rho >= 1.0) {
        throw DegenerateWindowError(
            "the conditional quadratic statistic needs a window shorter than "
            "the whole observation interval (tau2 - tau1 < 1); got tau1 = " +
            std::to_string(tau1) + ", tau2 = " + std::to_string(tau2));
    }
    const double inside = static_cast<double>(sample.count(tau1, tau2));
    const double outside = static_cast<double>(sample.size()) - inside;
    return quad_kernel_cond(inside, outside, rho, sample.scale());
}

// ============================================================================
// Supremum evaluators
// ============================================================================

namespace {

/// One candidate for a supremum over an open range.
struct Candidate {
    double value;
    double arg;
    bool attained;
};

/// Keeps the best candidate: larger value wins; on equal value the smaller
/// argument wins; on equal argument an attained value wins over a limit.
class BestCandidate {
  public:
    void offer(const Candidate & c) {
        if (!has_) {
            best_ = c;
            has_ = true;
            return;
        }
        if (c.value > best_.value ||
            (c.value == best_.value &&
             (c.arg < best_.arg ||
              (c.arg == best_.arg && c.attained && !best_.attained)))) {
            best_ = c;
        }
    }

    [[nodiscard]] SupResult result() const {
        return SupResult{best_.value, best_.arg, best_.attained};
    }

  private:
    Candidate best_{};
    bool has_ = false;
};

}  // namespace

SupResult sup_shifted_over_length(const EventSample & sample, double tau_star,
                                  double delta_star, bool known_baseline,
                                  double lambda0) {
    if (!(tau_star >= 0.0) || !(tau_star < 1.0)) {
        throw InvalidParameterError(
            "sup over the window length requires tau_star in [0, 1), got " +
            std::to_string(tau_star));
    }
    const double sgn = require_height(delta_star);
    if (known_baseline) {
        require_rate(lambda0);
    }
    const double scale = sample.scale();
    const double abs_delta = std::abs(delta_star);
    const double total = static_cast<double>(sample.size());

    // Deterministic part of the statistic as a function of the length ell; it
    // is linear (known baseline) or convex quadratic (conditional), so piece
    // suprema sit at piece endpoints.
    auto drift = [&](double ell) {
        if (known_baseline) {
            return -sgn * lambda0 * scale * ell - abs_delta * scale * ell / 2.0;
        }
        return -sgn * total * ell -
               abs_delta * scale * ell * (1.0 - ell) / 2.0;
    };

    const auto & times = sample.times();
    BestCandidate best;

    // Limit at ell -> 0+: the window empties and the drift vanishes.
    best.offer(Candidate{0.0, 0.0, false});

    // Entries: events strictly inside (tau_star, 1) enter at ell = t - tau_star.
    auto it = std::upper_bound(times.begin(), times.end(), tau_star);
    std::uint64_t count = 0;
    while (it != times.end() && *it < 1.0) {
        const double t = *it;
        std::uint64_t multiplicity = 0;
        while (it != times.end() && *it == t) {
            ++multiplicity;
            ++it;
        }
        const double ell = t - tau_star;
        const double d = drift(ell);
        // Left limit just before the entry, then the attained value at it.
        best.offer(Candidate{sgn * static_cast<double>(count) + d, ell, false});
        count += multiplicity;
        best.offer(Candidate{sgn * static_cast<double>(count) + d, ell, true});
    }

    // Limit at ell -> (1 - tau_star)-: every event in (tau_star, 1) is
    // inside; events exactly at 1 never enter before the open right end.
    const double ell_max = 1.0 - tau_star;
    best.offer(Candidate{sgn * static_cast<double>(count) + drift(ell_max),
                         ell_max, false});
    return best.result();
}

SupResult sup_shifted_over_location(const EventSample & sample,
                                    double delta_star, bool known_baseline,
                                    double lambda0) {
    const double sgn = require_height(delta_star);
    if (known_baseline) {
        require_rate(lambda0);
    }
    const double scale = sample.scale();
    const double abs_delta = std::abs(delta_star);
    const double total = static_cast<double>(sample.size());

    // Deterministic part as a function of tau (window (tau, 1]); linear for
    // the known baseline, convex quadratic for the conditional variant.
    auto drift = [&](double tau) {
        if (known_baseline) {
            return -sgn * lambda0 * scale * (1.0 - tau) -
                   abs_delta * scale * (1.0 - tau) / 2.0;
        }
        return -sgn * total * (1.0 - tau) -
               abs_delta * scale * tau * (1.0 - tau) / 2.0;
    };

    const auto & times = sample.times();
    BestCandidate best;

    // Limit at tau -> 0+: the window is essentially (0, 1], holding all
    // events (they all lie strictly above 0).
    best.offer(Candidate{sgn * total + drift(0.0), 0.0, false});

    // Each distinct event time in (0, 1) is a piece boundary: the count over
    // (tau, 1] drops there (attained, the window is left-open).
    std::uint64_t remaining = sample.size();
    for (auto it = times.begin(); it != times.end() && *it < 1.0;) {
        const double t = *it;
        std::uint64_t multiplicity = 0;
        while (it != times.end() && *it == t) {
            ++multiplicity;
            ++it;
        }
        const double d = drift(t);
        best.offer(
            Candidate{sgn * static_cast<double>(remaining) + d, t, false});
        remaining -= multiplicity;
        best.offer(
            Candidate{sgn * static_cast<double>(remaining) + d, t, true});
    }

    // Limit at tau -> 1-: only events exactly at time 1 stay inside.
    best.offer(Candidate{sgn * static_cast<double>(remaining) + drift(1.0),
                         1.0, false});
    return best.result();
}

// ============================================================================
// Moment formulas
// ============================================================================

Moments moments_quad(double x, double tau1, double tau2, double lambda0,
                     double scale) {
    require_window(tau1, tau2);
    require_rate(lambda0);
    if (!(x > 0.0) || !(scale > 0.0)) {
        throw InvalidParameterError(
            "moments_quad requires window mass x > 0 and scale > 0; got x = " +
            std::to_string(x) + ", scale = " + std::to_string(scale));
    }
    const double rho = tau2 - tau1;
    const double root = x / std::sqrt(rho) - lambda0 * std::sqrt(rho);
    const double dev = x / rho - lambda0;
    const double variance = 4.0 * x * dev * dev / scale +
                            2.0 * x * x / (scale * scale * rho * rho);
    return Moments{root * root, variance};
}

Moments moments_quad_cond(double x, double y, double z, double tau1,
                          double tau2, double scale) {
    require_window(tau1, tau2);
    const double rho = tau2 - tau1;
    if (rho >= 1.0) {
        throw DegenerateWindowError(
            "moments_quad_cond requires tau2 - tau1 < 1; got tau1 = " +
            std::to_string(tau1) + ", tau2 = " + std::to_string(tau2));
    }
    if (!(y > 0.0) || x < 0.0 || z < 0.0 || !(scale > 0.0)) {
        throw InvalidParameterError(
            "moments_quad_cond requires segment masses x >= 0, y > 0, "
            "z >= 0 and scale > 0; got x = " +
            std::to_string(x) + ", y = " + std::to_string(y) + ", z = " +
            std::to_string(z) + ", scale = " + std::to_string(scale));
    }
    const double a = rho / (1.0 - rho);
    const double b = (1.0 - rho) / rho;
    const double out = x + z;
    const double root = std::sqrt(a) * out - std::sqrt(b) * y;
    const double spread = a * out + b * y;
    const double dev = y - a * out;
    const double variance =
        2.0 * spread * spread / (scale * scale) +
        4.0 * b * b * dev * dev * (a * a * out + y) / scale;
    return Moments{root * root, variance};
}

}  // namespace pcd
