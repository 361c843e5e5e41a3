"""Independent reference implementations used by the tests.

Nothing here calls the package's closed forms: pmfs are written from the
mixture definition, moments come from series sums, small trees are
enumerated exhaustively, and the likelihood is a plain per-vertex sum.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def poisson_zero_pmf(p, lam, k):
    if k == 0:
        return p
    if k == 1:
        return 0.0
    j = k - 2
    if lam == 0:
        return (1 - p) * (1.0 if j == 0 else 0.0)
    return (1 - p) * math.exp(-lam) * lam**j / math.factorial(j) if j < 170 else \
        (1 - p) * math.exp(-lam + j * math.log(lam) - math.lgamma(j + 1))


def geometric_zero_pmf(p, q, k):
    if k == 0:
        return p
    if k == 1:
        return 0.0
    return (1 - p) * q * (1 - q) ** (k - 2)


def series_moments(pmf, xmax):
    """Mass, mean and variance of ``pmf`` summed over 0..xmax."""
    k = np.arange(xmax + 1, dtype=float)
    w = np.array([pmf(int(i)) for i in k])
    mass = w.sum()
    mean = (k * w).sum()
    var = (k * k * w).sum() - mean * mean
    return float(mass), float(mean), float(var)


def poisson_zero_from_moments_numeric(mean, var):
    """Root-finding inverse: solve var(lambda) = var with p tied to the mean."""
    from scipy.optimize import brentq

    def var_of(lam):
        p = 1 - mean / (lam + 2)
        second = (1 - p) * (lam + (lam + 2) ** 2)
        return second - mean * mean

    lam = brentq(lambda l: var_of(l) - var, max(mean - 2, 0.0), 1e6, xtol=1e-15, rtol=1e-15)
    return 1 - mean / (lam + 2), lam


def enumerate_two_generation(p0, p1, p2):
    """Exact joint law of small support-{0, 2} trees up to generation 2.

    Generation 0 and 1 vertices have 0 children with probability ``p0``/``p1``
    and 2 otherwise.  A generation-2 vertex is only classified as childless
    (probability ``p2``) or not, which is all the leaf counts and the event
    N_max <= 2 need.

    Returns a list of ``(prob, z, leaves, height_le)`` with ``z`` and
    ``leaves`` indexed by generation 0..2 and ``height_le[n] = 1{N_max <= n}``.
    """
    out = []
    for root_kids in (0, 2):
        w0 = p0 if root_kids == 0 else 1 - p0
        if root_kids == 0:
            out.append((w0, (1, 0, 0), (1, 0, 0), (1, 1, 1)))
            continue
        for g1 in itertools.product((0, 2), repeat=2):
            w1 = w0 * math.prod(p1 if c == 0 else 1 - p1 for c in g1)
            z2 = sum(g1)
            leaves1 = sum(c == 0 for c in g1)
            for g2 in itertools.product((True, False), repeat=z2):
                w = w1 * math.prod(p2 if leaf else 1 - p2 for leaf in g2)
                leaves2 = sum(g2)
                out.append((w, (1, 2, z2), (0, leaves1, leaves2),
                            (0, int(z2 == 0), int(leaves2 == z2))))
    return out


def moments_from_outcomes(outcomes, f, g=None):
    """E[f], Var[f] (or Cov[f, g]) over an enumerated outcome list."""
    g = g or f
    ef = sum(o[0] * f(o) for o in outcomes)
    eg = sum(o[0] * g(o) for o in outcomes)
    efg = sum(o[0] * f(o) * g(o) for o in outcomes)
    return ef, efg - ef * eg


def direct_log_likelihood(trees, family_of, native_of):
    """Sum of log pmf over every vertex of every tree."""
    total = 0.0
    cache = {}
    for tree in trees:
        kids = tree.offspring_counts()
        for v in range(tree.size):
            n = tree.generation[v]
            if n not in cache:
                cache[n] = (family_of(n), native_of(n))
            family, native = cache[n]
            k = int(kids[v])
            if family == "poisson-zero":
                prob = poisson_zero_pmf(native.p, native.lam, k)
            else:
                prob = geometric_zero_pmf(native.p, native.q, k)
            if prob == 0.0:
                return -math.inf
            total += math.log(prob)
    return total


def correlated_gen2_sample(draw0, draw1, rho, size, rng):
    """Z_2 with generation-1 offspring counts pairwise correlated at ``rho``.

    Each generation-1 vertex copies a shared draw W with probability
    sqrt(rho) and otherwise uses its own independent draw, so two distinct
    vertices share W with probability rho and corr = rho exactly while the
    marginals are unchanged.
    """
    z1 = draw0(size)
    shared = draw1(size)
    idx = np.repeat(np.arange(size), z1)
    own = draw1(idx.size)
    use_shared = rng.random(idx.size) < math.sqrt(rho)
    x = np.where(use_shared, shared[idx], own)
    return np.bincount(idx, weights=x, minlength=size)


def brute_geometric_min_variance(mean, grid=200_001):
    """Minimum variance over a fine q grid at a fixed mean."""
    q = np.linspace(1e-6, 1.0, grid)
    one_minus_p = mean * q / (1 + q)
    ok = one_minus_p <= 1
    p = 1 - one_minus_p[ok]
    q = q[ok]
    second = (1 - p) * ((1 - q) / q**2 + ((1 + q) / q) ** 2)
    return float((second - mean * mean).min())
