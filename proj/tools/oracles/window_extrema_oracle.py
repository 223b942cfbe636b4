#!/usr/bin/env python3
"""Brute-force oracle for sliding-window count extrema.

Scans tau over a dense grid and counts events in the half-open window
(tau, tau+ell], recording the extremum and the smallest tau achieving it.
Used to freeze expected values for the exact (event-anchored) evaluators
in the C++ test suite.
"""

import bisect


def count(times, a, b):
    """Number of event times t with a < t <= b."""
    return bisect.bisect_right(times, b) - bisect.bisect_right(times, a)


def grid_extrema(times, ell, grid_n=100_000):
    times = sorted(times)
    best_max, best_max_tau = -1, None
    best_min, best_min_tau = len(times) + 1, None
    for i in range(grid_n + 1):
        tau = i / grid_n * (1.0 - ell)
        c = count(times, tau, tau + ell)
        if c > best_max:
            best_max, best_max_tau = c, tau
        if c < best_min:
            best_min, best_min_tau = c, tau
    return (best_max, best_max_tau), (best_min, best_min_tau)


def report(name, times, ell):
    (mx, mxt), (mn, mnt) = grid_extrema(times, ell)
    print(f"{name}: ell={ell}")
    print(f"  max count = {mx} (first grid tau ~ {mxt:.6f})")
    print(f"  min count = {mn} (first grid tau ~ {mnt:.6f})")


def main():
    report("three events", [0.1, 0.15, 0.5], 0.1)
    uniform = [k / 10 for k in range(1, 10)]  # 0.1, 0.2, ..., 0.9
    report("uniform spacing 0.1", uniform, 0.35)
    report("single event, full window", [0.3], 1.0)


if __name__ == "__main__":
    main()
