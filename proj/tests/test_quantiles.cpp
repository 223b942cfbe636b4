/**
 * @file test_quantiles.cpp
 * @brief Tests for exact discrete quantiles, randomization weights,
 *        chi-square quantiles and the closed-form quantile bounds.
 *
 * Oracles come from three independent routes: hand-computed closed forms
 * (small Poisson/binomial CDFs evaluated as exact rationals), textbook
 * identities (gamma/erf special cases, the Poisson pmf recurrence), and
 * frozen decimal constants computed once by direct summation.
 */

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include <pcd/errors.hpp>
#include <pcd/quantiles.hpp>
#include <pcd/rng.hpp>

using Catch::Approx;

namespace {

/// Direct pmf summation: smallest k with CDF(k) >= u.  Independent of the
/// log-space recursion inside poisson_quantile (uses long double running
/// products), usable as an oracle for moderate means.
std::int64_t brute_poisson_quantile(double xi, double u) {
    long double pmf = std::exp(static_cast<long double>(-xi));
    long double cdf = pmf;
    std::int64_t k = 0;
    while (cdf < u && k < 100000) {
        ++k;
        pmf *= static_cast<long double>(xi) / static_cast<long double>(k);
        cdf += pmf;
    }
    return k;
}

}  // namespace

// ============================================================================
// Poisson quantiles
// ============================================================================

TEST_CASE("poisson quantile matches hand-computed small cases") {
    // xi = 1, u = 0.3: P(X = 0) = e^{-1} = 0.3679 >= 0.3, so the quantile
    // is 0 with no mass below it.
    const auto q1 = pcd::poisson_quantile(1.0, 0.3);
    CHECK(q1.value == 0);
    CHECK(q1.cdf_below == Approx(0.0).margin(1e-15));
    CHECK(q1.pmf_at == Approx(std::exp(-1.0)).epsilon(1e-12));

    // xi = 2, u = 0.5: CDF(1) = 3 e^{-2} = 0.406 < 0.5 <= CDF(2) = 5 e^{-2}.
    const auto q2 = pcd::poisson_quantile(2.0, 0.5);
    CHECK(q2.value == 2);
    CHECK(q2.cdf_below == Approx(3.0 * std::exp(-2.0)).epsilon(1e-12));
    CHECK(q2.pmf_at == Approx(2.0 * std::exp(-2.0)).epsilon(1e-12));
    CHECK(q2.cdf_at() == Approx(5.0 * std::exp(-2.0)).epsilon(1e-12));

    // Frozen: the 0.95-quantile of Poisson(50) is 62 (direct summation).
    CHECK(pcd::poisson_quantile(50.0, 0.95).value == 62);
    CHECK(brute_poisson_quantile(50.0, 0.95) == 62);
}

TEST_CASE("poisson quantile satisfies the definition on a parameter sweep") {
    const double xis[] = {0.05, 0.5, 1.0, 3.7, 12.0, 50.0, 200.0, 4000.0};
    const double us[] = {0.001, 0.05, 0.3, 0.5, 0.8, 0.95, 0.999};
    for (double xi : xis) {
        for (double u : us) {
            CAPTURE(xi, u);
            const auto q = pcd::poisson_quantile(xi, u);
            // Smallest k with CDF(k) >= u.
            CHECK(q.cdf_at() >= u - 1e-12);
            CHECK(q.cdf_below < u + 1e-12);
            CHECK(q.value >= 0);
            // The reported atom is the pmf at the quantile.
            CHECK(q.pmf_at ==
                  Approx(pcd::poisson_pmf(xi, static_cast<std::uint64_t>(q.value)))
                      .epsilon(1e-10).margin(1e-300));
            if (xi <= 500.0) {
                CHECK(q.value == brute_poisson_quantile(xi, u));
            }
        }
    }
}

TEST_CASE("poisson quantile is stable for large means") {
    // The log-space recursion must not underflow: the median of Poisson(1e6)
    // lies within 1 of the mean.
    const auto q = pcd::poisson_quantile(1e6, 0.5);
    CHECK(std::llabs(q.value - 1000000) <= 1);
    CHECK(q.pmf_at > 0.0);
    CHECK(q.cdf_at() >= 0.5);
    CHECK(q.cdf_below < 0.5);
}

TEST_CASE("poisson quantile rejects invalid parameters") {
    CHECK_THROWS_AS(pcd::poisson_quantile(-0.1, 0.5), pcd::InvalidParameterError);
    CHECK_THROWS_AS(pcd::poisson_quantile(1.0, 0.0), pcd::InvalidParameterError);
    CHECK_THROWS_AS(pcd::poisson_quantile(1.0, 1.0), pcd::InvalidParameterError);
    CHECK_THROWS_AS(pcd::poisson_quantile(2e9, 0.5),
                    pcd::UnsupportedParameterError);
}

// ============================================================================
// Binomial quantiles
// ============================================================================

TEST_CASE("binomial quantile matches exact rational arithmetic") {
    // Bin(10, 1/2): CDF(4) = 386/1024, pmf(5) = 252/1024, so the median is 5
    // and the lower randomization weight at u = 1/2 is exactly 1/2.
    const auto q = pcd::binomial_quantile(10, 0.5, 0.5);
    CHECK(q.value == 5);
    CHECK(q.cdf_below == Approx(386.0 / 1024.0).epsilon(1e-12));
    CHECK(q.pmf_at == Approx(252.0 / 1024.0).epsilon(1e-12));
    CHECK(pcd::lower_atom_weight(q, 0.5) == Approx(0.5).epsilon(1e-10));
}

TEST_CASE("binomial quantile handles degenerate parameters") {
    CHECK(pcd::binomial_quantile(10, 0.0, 0.5).value == 0);
    CHECK(pcd::binomial_quantile(10, 0.0, 0.5).pmf_at == Approx(1.0));
    CHECK(pcd::binomial_quantile(10, 1.0, 0.5).value == 10);
    CHECK(pcd::binomial_quantile(0, 0.3, 0.7).value == 0);
    CHECK(pcd::binomial_quantile(0, 0.3, 0.7).pmf_at == Approx(1.0));
}

TEST_CASE("binomial quantile satisfies the definition on a parameter sweep") {
    const std::uint64_t ns[] = {1, 2, 7, 40, 500};
    const double ps[] = {0.1, 0.4, 0.5, 0.9};
    const double us[] = {0.01, 0.25, 0.5, 0.75, 0.99};
    for (std::uint64_t n : ns) {
        for (double p : ps) {
            for (double u : us) {
                CAPTURE(n, p, u);
                const auto q = pcd::binomial_quantile(n, p, u);
                CHECK(q.cdf_at() >= u - 1e-12);
                CHECK(q.cdf_below < u + 1e-12);
                CHECK(q.value >= 0);
                CHECK(q.value <= static_cast<std::int64_t>(n));
                CHECK(q.pmf_at ==
                      Approx(pcd::binomial_pmf(
                                 n, p, static_cast<std::uint64_t>(q.value)))
                          .epsilon(1e-10).margin(1e-300));
            }
        }
    }
}

TEST_CASE("binomial pmf sums to one") {
    for (std::uint64_t n : {1ULL, 5ULL, 30ULL}) {
        for (double p : {0.2, 0.5, 0.8}) {
            double total = 0.0;
            for (std::uint64_t k = 0; k <= n; ++k) {
                total += pcd::binomial_pmf(n, p, k);
            }
            CHECK(total == Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK(pcd::binomial_pmf(10, 0.5, 5) == Approx(252.0 / 1024.0).epsilon(1e-12));
}

// ============================================================================
// Randomization weights
// ============================================================================

TEST_CASE("atom weights deliver exact size and are complementary") {
    // xi = 1, u = 0.3: quantile 0, lower weight = 0.3 / e^{-1} = 0.3 e.
    const auto q = pcd::poisson_quantile(1.0, 0.3);
    CHECK(pcd::lower_atom_weight(q, 0.3) ==
          Approx(0.3 * std::exp(1.0)).epsilon(1e-12));

    // In general: rejecting {X < q} plus a g-weighted coin on {X = q} has
    // probability exactly u, and the upper-tail weight is its complement.
    const double xis[] = {0.5, 1.0, 7.3, 40.0};
    const double us[] = {0.02, 0.3, 0.5, 0.77, 0.97};
    for (double xi : xis) {
        for (double u : us) {
            CAPTURE(xi, u);
            const auto dq = pcd::poisson_quantile(xi, u);
            const double lower = pcd::lower_atom_weight(dq, u);
            const double upper = pcd::upper_atom_weight(dq, u);
            CHECK(lower >= 0.0);
            CHECK(lower <= 1.0);
            CHECK(upper >= 0.0);
            CHECK(upper <= 1.0);
            CHECK(lower + upper == Approx(1.0).epsilon(1e-9));
            CHECK(dq.cdf_below + lower * dq.pmf_at == Approx(u).epsilon(1e-10));
            // P(X > q) + upper * P(X = q) = 1 - u.
            CHECK((1.0 - dq.cdf_at()) + upper * dq.pmf_at ==
                  Approx(1.0 - u).epsilon(1e-9).margin(1e-12));
        }
    }
}

// ============================================================================
// Pmf and tail evaluation
// ============================================================================

TEST_CASE("poisson pmf satisfies the recurrence k p(k) = xi p(k-1)") {
    for (double xi : {0.5, 5.0, 50.0, 1000.0}) {
        for (std::uint64_t k : {1ULL, 2ULL, 10ULL, 60ULL}) {
            CAPTURE(xi, k);
            const double lhs = static_cast<double>(k) * pcd::poisson_pmf(xi, k);
            const double rhs = xi * pcd::poisson_pmf(xi, k - 1);
            CHECK(lhs == Approx(rhs).epsilon(1e-10).margin(1e-300));
        }
    }
    CHECK(pcd::poisson_pmf(2.0, 0) == Approx(std::exp(-2.0)).epsilon(1e-13));
    // Large-mean evaluation must not underflow where the mass lives.
    CHECK(pcd::poisson_pmf(1e6, 1000000) ==
          Approx(1.0 / std::sqrt(2.0 * std::acos(-1.0) * 1e6)).epsilon(1e-4));
}

TEST_CASE("poisson upper tail complements the lower cdf") {
    for (double xi : {0.3, 2.0, 25.0}) {
        CHECK(pcd::poisson_upper_tail(xi, 0) == Approx(1.0).epsilon(1e-12));
        double cdf = 0.0;
        double previous = 1.0;
        for (std::uint64_t k = 0; k <= 40; ++k) {
            const double tail = pcd::poisson_upper_tail(xi, k);
            CAPTURE(xi, k);
            CHECK(tail == Approx(1.0 - cdf).epsilon(1e-10).margin(1e-12));
            CHECK(tail <= previous + 1e-15);
            previous = tail;
            cdf += pcd::poisson_pmf(xi, k);
        }
    }
}

// ============================================================================
// Gamma and chi-square
// ============================================================================

TEST_CASE("regularized gamma matches exponential and erf special cases") {
    for (double x : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
        CAPTURE(x);
        // P(1, x) = 1 - e^{-x}.
        CHECK(pcd::regularized_gamma_p(1.0, x) ==
              Approx(1.0 - std::exp(-x)).epsilon(1e-9));
        // P(1/2, x) = erf(sqrt(x)).
        CHECK(pcd::regularized_gamma_p(0.5, x) ==
              Approx(std::erf(std::sqrt(x))).epsilon(1e-9));
    }
    CHECK(pcd::regularized_gamma_p(3.0, 0.0) == Approx(0.0).margin(1e-14));
}

TEST_CASE("chi-square quantile closed form for two degrees of freedom") {
    // Chi-square with df = 2 is exponential with mean 2:
    // quantile(u) = -2 log(1 - u).
    for (double u : {0.05, 0.25, 0.5, 0.9, 0.95, 0.999}) {
        CAPTURE(u);
        CHECK(pcd::chi_squared_quantile(2.0, u) ==
              Approx(-2.0 * std::log(1.0 - u)).epsilon(1e-8));
    }
    CHECK(pcd::chi_squared_quantile(2.0, 0.5) ==
          Approx(2.0 * std::log(2.0)).epsilon(1e-8));
}

TEST_CASE("chi-square quantile round-trips through the gamma cdf") {
    for (double df : {1.0, 2.0, 5.0, 17.0}) {
        for (double u : {0.01, 0.3, 0.5, 0.9, 0.99}) {
            CAPTURE(df, u);
            const double q = pcd::chi_squared_quantile(df, u);
            // The quantile is solved to ~1e-10 relative; the round-trip
            // through the steep small-quantile CDF amplifies that, so the
            // check on u is looser.
            CHECK(pcd::regularized_gamma_p(df / 2.0, q / 2.0) ==
                  Approx(u).epsilon(1e-6));
        }
    }
}

// ============================================================================
// Closed-form bounds
// ============================================================================

TEST_CASE("bennett g and its inverse envelope") {
    CHECK(pcd::bennett_g(0.0) == Approx(0.0).margin(1e-15));
    CHECK(pcd::bennett_g(1.0) == Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-12));
    // Strictly increasing and convex on a grid.
    double previous = -1.0;
    double previous_slope = 0.0;
    for (double x = 0.0; x <= 5.0; x += 0.25) {
        const double value = pcd::bennett_g(x);
        CHECK(value > previous);
        if (x > 0.0) {
            const double slope = (value - pcd::bennett_g(x - 0.25)) / 0.25;
            CHECK(slope >= previous_slope - 1e-12);
            previous_slope = slope;
        }
        previous = value;
    }
    // Envelope property: g(bound(y)) >= y, so thresholds derived from the
    // bound are conservative.
    CHECK(pcd::bennett_g_inverse_bound(0.0) == Approx(0.0).margin(1e-15));
    for (double y : {1e-6, 1e-2, 0.1, 1.0, 10.0, 100.0}) {
        CAPTURE(y);
        const double x = pcd::bennett_g_inverse_bound(y);
        CHECK(x == Approx(2.0 * y / 3.0 + std::sqrt(2.0 * y)).epsilon(1e-12));
        CHECK(pcd::bennett_g(x) >= y);
    }
}

TEST_CASE("poisson quantile sandwich brackets the exact quantile") {
    const double xis[] = {0.5, 1.0, 5.0, 20.0, 100.0};
    const double us[] = {0.05, 0.3, 0.5, 0.9, 0.99};
    for (double xi : xis) {
        for (double u : us) {
            CAPTURE(xi, u);
            const auto sandwich = pcd::poisson_quantile_sandwich(xi, u);
            CHECK(sandwich.lower ==
                  Approx(xi - std::sqrt(xi / u)).epsilon(1e-12));
            CHECK(sandwich.upper ==
                  Approx(xi + std::sqrt(xi / (1.0 - u))).epsilon(1e-12));
            const auto q = pcd::poisson_quantile(xi, u);
            CHECK(static_cast<double>(q.value) >= sandwich.lower - 1e-9);
            CHECK(static_cast<double>(q.value) <= sandwich.upper + 1e-9);
        }
    }
}

TEST_CASE("quadratic statistic quantile bound hand constant") {
    // lambda0 = 1, L = 100, rho = 0.5, u = 0.05:
    // y = log(60)/50, bound = 2 * 0.5 * (2y/3 + sqrt(2y))^2 = 0.21094.
    const double bound = pcd::quad_stat_quantile_bound(1.0, 100.0, 0.5, 0.05);
    CHECK(bound == Approx(0.21094).margin(5e-4));
    const double y = std::log(3.0 / 0.05) / 50.0;
    const double ginv = 2.0 * y / 3.0 + std::sqrt(2.0 * y);
    CHECK(bound == Approx(2.0 * 0.5 * ginv * ginv).epsilon(1e-12));
    // Shrinking the window or raising u tightens the bound.
    CHECK(pcd::quad_stat_quantile_bound(1.0, 100.0, 0.5, 0.2) < bound);
}

TEST_CASE("absolute centered count quantile bound hand constant") {
    // lambda0 = 1, L = 100, rho = 0.5, u = 0.05:
    // 50 * ginv(log(40)/50) = 21.666.
    const double bound = pcd::abs_lin_stat_quantile_bound(1.0, 100.0, 0.5, 0.05);
    CHECK(bound == Approx(21.666).margin(5e-3));
    const double y = std::log(2.0 / 0.05) / 50.0;
    CHECK(bound == Approx(50.0 * (2.0 * y / 3.0 + std::sqrt(2.0 * y)))
                       .epsilon(1e-12));
}

TEST_CASE("scanning extrema bounds are symmetric about the null mean") {
    for (double ell : {0.1, 0.4, 0.9}) {
        for (double alpha : {0.01, 0.05, 0.2}) {
            CAPTURE(ell, alpha);
            const double upper =
                pcd::window_max_quantile_bound(1.0, 100.0, ell, alpha);
            const double lower =
                pcd::window_min_quantile_bound(1.0, 100.0, ell, alpha);
            // upper - mean == mean - lower with mean = lambda0 L ell.
            CHECK(upper + lower == Approx(2.0 * 100.0 * ell).epsilon(1e-12));
            CHECK(upper > 100.0 * ell);
        }
    }
    // Smaller alpha widens the band.
    CHECK(pcd::window_max_quantile_bound(1.0, 100.0, 0.4, 0.01) >
          pcd::window_max_quantile_bound(1.0, 100.0, 0.4, 0.05));
}

TEST_CASE("conditional absolute count bound hand constant and monotonicity") {
    // n = 100, rho = 0.5, u = 0.05:
    // (2/3) log 40 + sqrt(25) sqrt(2 log 40) = 16.040.
    const double bound = pcd::cond_abs_lin_stat_quantile_bound(100, 0.5, 0.05);
    CHECK(bound == Approx(16.040).margin(5e-3));
    const double logterm = std::log(2.0 / 0.05);
    CHECK(bound == Approx(2.0 / 3.0 * logterm +
                          std::sqrt(100.0 * 0.25) * std::sqrt(2.0 * logterm))
                       .epsilon(1e-12));
    // With no events only the additive term remains; more events widen it.
    CHECK(pcd::cond_abs_lin_stat_quantile_bound(0, 0.5, 0.05) ==
          Approx(2.0 / 3.0 * logterm).epsilon(1e-12));
    CHECK(pcd::cond_abs_lin_stat_quantile_bound(400, 0.5, 0.05) > bound);
}
