#!/usr/bin/env python3
"""Direct-summation oracle for discrete quantiles.

Computes Poisson and binomial quantiles by brute-force CDF enumeration
(plain floating-point pmf recursion from k=0), plus the exact quantile of
the absolute centered Poisson count used by the Monte-Carlo quantile test.
"""

import math


def poisson_pmf(xi, kmax):
    p = [math.exp(-xi)]
    for k in range(1, kmax + 1):
        p.append(p[-1] * xi / k)
    return p


def poisson_quantile(xi, u, kmax=10_000):
    pmf = poisson_pmf(xi, kmax)
    acc = 0.0
    for k, pk in enumerate(pmf):
        acc += pk
        if acc >= u:
            return k
    raise RuntimeError("kmax too small")


def binomial_quantile(n, p, u):
    pmf = [math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1)]
    acc = 0.0
    for k, pk in enumerate(pmf):
        acc += pk
        if acc >= u:
            return k, acc - pk, pk  # b, P(Y<b), P(Y=b)
    raise RuntimeError("unreachable")


def abs_centered_poisson_quantile(xi, center, u, kmax=10_000):
    """Smallest c with P(|X - center| <= c) >= u, X ~ Poisson(xi)."""
    pmf = poisson_pmf(xi, kmax)
    c = 0
    while True:
        mass = sum(pk for k, pk in enumerate(pmf) if abs(k - center) <= c)
        if mass >= u:
            return c
        c += 1


def main():
    print(f"poisson_quantile(1, 0.3)  = {poisson_quantile(1.0, 0.3)}")
    print(f"poisson_quantile(2, 0.5)  = {poisson_quantile(2.0, 0.5)}")
    q = poisson_quantile(50.0, 0.95)
    print(f"poisson_quantile(50, 0.95) = {q}  (sandwich: [{50 - math.sqrt(50/0.95):.3f}, {50 + math.sqrt(50/0.05):.3f}])")

    b, below, atom = binomial_quantile(10, 0.5, 0.5)
    gamma_minus = (0.5 - below) / atom
    print(f"binomial_quantile(10, 0.5, 0.5) = {b}, gamma_minus = {gamma_minus:.10f}")

    c = abs_centered_poisson_quantile(50.0, 50, 0.95)
    print(f"0.95-quantile of |Poisson(50) - 50| = {c}")


if __name__ == "__main__":
    main()
