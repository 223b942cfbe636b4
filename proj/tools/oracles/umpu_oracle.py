#!/usr/bin/env python3
"""Independent solver for the two-sided randomized level split.

Given a count distribution (Poisson or binomial), finds (alpha1, alpha2)
with alpha1 + alpha2 = alpha such that the randomized two-sided test

    phi(k) = 1{k > b_hi} + g_hi*1{k = b_hi} + 1{k < b_lo} + g_lo*1{k = b_lo}

with b_hi the (1-alpha1)-quantile, g_hi = (CDF(b_hi) - (1-alpha1))/pmf(b_hi),
b_lo the alpha2-quantile, g_lo = (alpha2 - P(X < b_lo))/pmf(b_lo),
satisfies E[X phi(X)] = alpha E[X].  The upper part has exact size alpha1 and
the lower part exact size alpha2, so E[phi] = alpha automatically.
Values frozen into the detector tests come from this script.
"""

import math


def poisson_support(xi):
    kmax = int(xi + 40 * math.sqrt(xi) + 50)
    pmf = [math.exp(-xi)]
    for k in range(1, kmax + 1):
        pmf.append(pmf[-1] * xi / k)
    return pmf


def binomial_support(n, p):
    return [math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1)]


def quantile(pmf, u):
    acc = 0.0
    for k, pk in enumerate(pmf):
        acc += pk
        if acc >= u:
            return k, acc, pk  # k, CDF(k), pmf(k)
    return len(pmf) - 1, 1.0, pmf[-1]


def phi_moments(pmf, alpha1, alpha2):
    """Returns (E[phi], E[X phi]) for the randomized two-sided test."""
    b_hi, cdf_hi, p_hi = quantile(pmf, 1.0 - alpha1)
    g_hi = (cdf_hi - (1.0 - alpha1)) / p_hi
    b_lo, cdf_lo, p_lo = quantile(pmf, alpha2)
    g_lo = (alpha2 - (cdf_lo - p_lo)) / p_lo
    e_phi = 0.0
    e_xphi = 0.0
    for k, pk in enumerate(pmf):
        phi = 0.0
        if k > b_hi:
            phi += 1.0
        elif k == b_hi:
            phi += g_hi
        if k < b_lo:
            phi += 1.0
        elif k == b_lo:
            phi += g_lo
        phi = min(phi, 1.0)
        e_phi += pk * phi
        e_xphi += k * pk * phi
    return e_phi, e_xphi


def solve_split(pmf, alpha):
    mean = sum(k * pk for k, pk in enumerate(pmf))
    lo, hi = 1e-15, alpha - 1e-15
    for _ in range(200):
        a1 = 0.5 * (lo + hi)
        _, e_xphi = phi_moments(pmf, a1, alpha - a1)
        if e_xphi < alpha * mean:
            lo = a1
        else:
            hi = a1
    a1 = 0.5 * (lo + hi)
    e_phi, e_xphi = phi_moments(pmf, a1, alpha - a1)
    return a1, alpha - a1, e_phi, e_xphi - alpha * mean


def main():
    alpha = 0.05
    print("Poisson (xi = lambda0 * ell * L):")
    for lam, ell, L in [(1.0, 0.4, 100.0), (5.0, 0.1, 50.0), (0.5, 0.9, 30.0)]:
        xi = lam * ell * L
        a1, a2, e_phi, resid = solve_split(poisson_support(xi), alpha)
        print(f"  xi={xi:6.1f}: alpha1={a1:.12f} alpha2={a2:.12f} "
              f"size={e_phi:.12f} residual={resid:.3e}")

    print("Binomial (n, p=0.4):")
    for n in [1, 5, 20, 100]:
        a1, a2, e_phi, resid = solve_split(binomial_support(n, 0.4), alpha)
        print(f"  n={n:4d}: alpha1={a1:.12f} alpha2={a2:.12f} "
              f"size={e_phi:.12f} residual={resid:.3e}")


if __name__ == "__main__":
    main()
