#!/usr/bin/env python3
"""Dense-grid oracle for suprema of shifted scan statistics.

Evaluates the shifted statistics on a 10^6-point parameter grid and reports
the maximum, as an independent check of the exact candidate-enumeration
evaluators. Grid values approach open-endpoint limits from inside, so the
reported value can sit a hair below an exact boundary limit; the freeze
comments note the exact limit where that applies.
"""

import bisect
import math


def count(times, a, b):
    return bisect.bisect_right(times, b) - bisect.bisect_right(times, a)


def sup_over_length(times, tau_star, delta_star, L, kind, lambda0=None, grid_n=1_000_000):
    """sup over ell in (0, 1-tau_star) of the shifted statistic on (tau*, tau*+ell]."""
    times = sorted(times)
    n1 = len(times)
    sgn = 1.0 if delta_star > 0 else -1.0
    best = -math.inf
    best_ell = None
    top = 1.0 - tau_star
    for i in range(1, grid_n):
        ell = i / grid_n * top
        c = count(times, tau_star, tau_star + ell)
        if kind == "known":
            v = sgn * (c - lambda0 * L * ell) - abs(delta_star) * L * ell / 2.0
        else:
            v = sgn * (c - ell * n1) - abs(delta_star) * L * ell * (1.0 - ell) / 2.0
        if v > best:
            best, best_ell = v, ell
    return best, best_ell


def sup_over_location(times, delta_star, L, kind, lambda0=None, grid_n=1_000_000):
    """sup over tau in (0,1) of the shifted statistic on (tau, 1]."""
    times = sorted(times)
    n1 = len(times)
    sgn = 1.0 if delta_star > 0 else -1.0
    best = -math.inf
    best_tau = None
    for i in range(1, grid_n):
        tau = i / grid_n
        c = count(times, tau, 1.0)
        rho = 1.0 - tau
        if kind == "known":
            v = sgn * (c - lambda0 * L * rho) - abs(delta_star) * L * rho / 2.0
        else:
            v = sgn * (c - rho * n1) - abs(delta_star) * L * rho * tau / 2.0
        if v > best:
            best, best_tau = v, tau
    return best, best_tau


def main():
    v, a = sup_over_length([0.5], 0.2, 1.0, 10.0, "known", lambda0=1.0)
    print(f"length-sup known, event at tau*+0.3, delta*=+1, lambda0=1, L=10: {v:.8f} at ell~{a:.6f}")

    v, a = sup_over_length([], 0.25, -0.5, 20.0, "cond")
    print(f"length-sup cond, empty sample, delta*=-0.5, L=20: {v:.8f} at ell~{a:.6f}")

    v, a = sup_over_length([0.3, 0.6, 0.9], 0.25, -0.5, 20.0, "cond")
    print(f"length-sup cond, events 0.3/0.6/0.9, tau*=0.25, delta*=-0.5, L=20: {v:.8f} at ell~{a:.6f}")

    v, a = sup_over_location([0.5], 1.0, 10.0, "known", lambda0=1.0)
    print(f"location-sup known, event at 0.5, delta*=+1, lambda0=1, L=10: {v:.8f} at tau~{a:.6f}")

    dense = [k / 10 for k in range(1, 10)]
    v, a = sup_over_location(dense, -1.0, 10.0, "known", lambda0=1.0)
    print(f"location-sup known, dense sample, delta*=-1, lambda0=1, L=10: {v:.8f} at tau~{a:.6f}")

    v, a = sup_over_location([0.3, 0.6, 0.9], -0.5, 20.0, "cond")
    print(f"location-sup cond, events 0.3/0.6/0.9, delta*=-0.5, L=20: {v:.8f} at tau~{a:.6f}")


if __name__ == "__main__":
    main()
