/**
 * @file grids.cpp
 * @brief Construction of the window collections and their segment
 *        decompositions.
 */

#include "pcd/grids.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcd/errors.hpp"

namespace pcd {

namespace {

/// Builds the cut-point list and the per-window segment spans.  Window
/// endpoints are matched against the cut list exactly (the same double
/// values flow into both), so the binary searches always hit.
void finalize(WindowGrid & grid) {
    grid.cuts.clear();
    grid.cuts.push_back(0.0);
    grid.cuts.push_back(1.0);
    for (const auto & w : grid.windows) {
        grid.cuts.push_back(w.tau1);
        grid.cuts.push_back(w.tau2);
    }
    std::sort(grid.cuts.begin(), grid.cuts.end());
    grid.cuts.erase(std::unique(grid.cuts.begin(), grid.cuts.end()),
                    grid.cuts.end());

    grid.spans.clear();
    grid.spans.reserve(grid.windows.size());
    for (const auto & w : grid.windows) {
        const auto first = std::lower_bound(grid.cuts.begin(),
                                            grid.cuts.end(), w.tau1);
        const auto last =
            std::lower_bound(grid.cuts.begin(), grid.cuts.end(), w.tau2);
        grid.spans.emplace_back(
            static_cast<std::uint32_t>(first - grid.cuts.begin()),
            static_cast<std::uint32_t>(last - grid.cuts.begin()));
    }
}

void require_scale(double scale) {
    if (!(scale >= 3.0) || !std::isfinite(scale)) {
        throw UnsupportedScaleError(
            "multi-window collections need an observation scale L >= 3, "
            "got L = " +
            std::to_string(scale));
    }
}

}  // namespace

std::uint32_t dyadic_depth(double scale) {
    require_scale(scale);
    return static_cast<std::uint32_t>(std::floor(std::log2(scale)));
}

std::uint32_t pruned_triangle_resolution(double scale) {
    require_scale(scale);
    return static_cast<std::uint32_t>(std::ceil(scale / std::log(scale)));
}

const char * grid_preset_id(GridPreset preset) {
    switch (preset) {
        case GridPreset::theta_d: return "theta_d";
        case GridPreset::theta_r: return "theta_r";
        case GridPreset::theta_d_u: return "theta_d_u";
        case GridPreset::theta_r_u: return "theta_r_u";
        case GridPreset::theta_1: return "theta_1";
        case GridPreset::theta_2: return "theta_2";
    }
    throw InvalidParameterError("unknown grid preset enumerator");
}

GridPreset grid_preset_from_id(const std::string & id) {
    if (id == "theta_d") return GridPreset::theta_d;
    if (id == "theta_r") return GridPreset::theta_r;
    if (id == "theta_d_u") return GridPreset::theta_d_u;
    if (id == "theta_r_u") return GridPreset::theta_r_u;
    if (id == "theta_1" || id == "theta") return GridPreset::theta_1;
    if (id == "theta_2") return GridPreset::theta_2;
    throw InvalidParameterError(
        "unknown grid preset '" + id +
        "'; known presets: theta_d, theta_r, theta_d_u, theta_r_u, "
        "theta_1, theta_2");
}

WindowGrid location_grid(const std::string & id,
                         const std::vector<double> & taus) {
    WindowGrid grid;
    grid.id = id;
    for (double tau : taus) {
        if (!(tau > 0.0) || !(tau < 1.0)) {
            throw InvalidParameterError(
                "location-grid change points must lie in (0, 1), got " +
                std::to_string(tau));
        }
        grid.windows.push_back(GridWindow{tau, 1.0});
    }
    if (grid.windows.empty()) {
        throw UnsupportedScaleError("a location grid needs at least one "
                                    "change point");
    }
    std::sort(grid.windows.begin(), grid.windows.end(),
              [](const GridWindow & a, const GridWindow & b) {
                  return a.tau1 < b.tau1;
              });
    finalize(grid);
    return grid;
}

WindowGrid make_grid(GridPreset preset, double scale) {
    require_scale(scale);
    const std::uint32_t depth = dyadic_depth(scale);
    std::vector<double> taus;
    switch (preset) {
        case GridPreset::theta_d:
            for (std::uint32_t k = 1; k <= depth; ++k) {
                taus.push_back(1.0 - std::ldexp(1.0, -static_cast<int>(k)));
            }
            return location_grid("theta_d", taus);
        case GridPreset::theta_r:
        case GridPreset::theta_r_u:
            for (int k = 1; k <= 9; ++k) {
                taus.push_back(static_cast<double>(k) / 10.0);
            }
            return location_grid(grid_preset_id(preset), taus);
        case GridPreset::theta_d_u:
            for (std::uint32_t k = 2; k <= depth; ++k) {
                taus.push_back(std::ldexp(1.0, -static_cast<int>(k)));
            }
            for (std::uint32_t k = 1; k <= depth; ++k) {
                taus.push_back(1.0 - std::ldexp(1.0, -static_cast<int>(k)));
            }
            return location_grid("theta_d_u", taus);
        case GridPreset::theta_1:
            return triangle_grid(
                static_cast<std::uint32_t>(std::ceil(scale)), false);
        case GridPreset::theta_2:
            return triangle_grid(pruned_triangle_resolution(scale), true);
    }
    throw InvalidParameterError("unknown grid preset enumerator");
}

WindowGrid shifted_window_grid(double ell_star, bool known_baseline) {
    if (!(ell_star > 0.0) || !(ell_star < 1.0)) {
        throw InvalidParameterError(
            "shifted scanning windows need a length ell_star in (0, 1), "
            "got " +
            std::to_string(ell_star));
    }
    const double m_real = known_baseline
                              ? 2.0 / ell_star
                              : 2.0 / (ell_star * (1.0 - ell_star));
    const auto M = static_cast<std::uint32_t>(std::ceil(m_real));
    const auto window_count = static_cast<std::uint32_t>(
        std::ceil((1.0 - ell_star) * static_cast<double>(M)));
    WindowGrid grid;
    grid.id = std::string("shifted_") +
              (known_baseline ? "known_" : "cond_") + "ell=" +
              std::to_string(ell_star);
    for (std::uint32_t k = 0; k < window_count; ++k) {
        const double tau1 = static_cast<double>(k) / static_cast<double>(M);
        const double tau2 = std::min(tau1 + ell_star, 1.0);
        grid.windows.push_back(GridWindow{tau1, tau2});
    }
    finalize(grid);
    return grid;
}

WindowGrid dyadic_length_grid(double tau_star, double scale) {
    if (!(tau_star >= 0.0) || !(tau_star < 1.0)) {
        throw InvalidParameterError(
            "dyadic-length windows need tau_star in [0, 1), got " +
            std::to_string(tau_star));
    }
    const std::uint32_t depth = dyadic_depth(scale);
    WindowGrid grid;
    grid.id = "dyadic_length_tau=" + std::to_string(tau_star);
    for (std::uint32_t k = 1; k <= depth; ++k) {
        const double ell =
            (1.0 - tau_star) * std::ldexp(1.0, -static_cast<int>(k));
        grid.windows.push_back(GridWindow{tau_star, tau_star + ell});
    }
    finalize(grid);
    return grid;
}

WindowGrid triangle_grid(std::uint32_t M, bool drop_full_window) {
    if (M < 1) {
        throw UnsupportedScaleError(
            "a triangle collection needs resolution M >= 1");
    }
    WindowGrid grid;
    grid.id = "triangle_M=" + std::to_string(M) +
              (drop_full_window ? "_pruned" : "");
    const double md = static_cast<double>(M);
    for (std::uint32_t k = 0; k < M; ++k) {
        for (std::uint32_t kp = 1; kp + k <= M; ++kp) {
            if (drop_full_window && k == 0 && kp == M) {
                continue;
            }
            grid.windows.push_back(
                GridWindow{static_cast<double>(k) / md,
                           static_cast<double>(k + kp) / md});
        }
    }
    if (grid.windows.empty()) {
        throw UnsupportedScaleError(
            "the triangle collection is empty at resolution M = " +
            std::to_string(M));
    }
    finalize(grid);
    return grid;
}

WindowGrid single_window_grid(double tau1, double tau2) {
    if (!(tau1 >= 0.0) || !(tau2 <= 1.0) || !(tau1 < tau2)) {
        throw InvalidIntervalError(
            "a single-window grid requires 0 <= tau1 < tau2 <= 1; got "
            "tau1 = " +
            std::to_string(tau1) + ", tau2 = " + std::to_string(tau2));
    }
    WindowGrid grid;
    grid.id = "window_" + std::to_string(tau1) + "_" + std::to_string(tau2);
    grid.windows.push_back(GridWindow{tau1, tau2});
    finalize(grid);
    return grid;
}

double bonferroni_level(double alpha, std::size_t window_count) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) {
        throw InvalidParameterError("alpha must lie in (0, 1), got " +
                                    std::to_string(alpha));
    }
    if (window_count == 0) {
        throw UnsupportedScaleError(
            "cannot split a test level over an empty window collection");
    }
    return alpha / static_cast<double>(window_count);
}

}  // namespace pcd
