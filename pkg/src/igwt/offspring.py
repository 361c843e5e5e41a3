"""Zero-inflated offspring families on {0, 2, 3, ...}.

Both families mix a point mass at zero (weight ``p``) with a standard
one-parameter count distribution translated by two, so a vertex never has
exactly one child.  Each family is parametrised uniquely by its mean and
variance, and the transforms between the two parametrisations are exact.

The ``*_to_moments`` / ``*_from_moments`` kernels accept numpy arrays and
are what the estimator calls in its inner loop; infeasible entries come back
as NaN.  The scalar functions (`pmf`, `pgf`, `from_moments`, ...) validate
their inputs and raise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InfeasibleMomentsError, InvalidParameterError

__all__ = [
    "Family",
    "MomentPair",
    "PoissonZeroParams",
    "GeometricZeroParams",
    "pmf",
    "pgf",
    "from_moments",
    "to_moments",
    "feasible_region",
    "sample",
    "min_variance",
]

# Round-trip tolerance used to decide geometric-zero feasibility.
ROUND_TRIP_RTOL = 1e-9
# Slack on closed-form boundaries so that exact boundary points survive rounding.
_BOUNDARY_RTOL = 1e-12
_DISCRIMINANT_ATOL = 1e-12


class Family(enum.Enum):
    POISSON_ZERO = "poisson-zero"
    GEOMETRIC_ZERO = "geometric-zero"

    @classmethod
    def parse(cls, value: "str | Family") -> "Family":
        if isinstance(value, Family):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown offspring family {value!r}")


@dataclass(frozen=True)
class MomentPair:
    mean: float
    variance: float

    def __post_init__(self):
        if not (self.mean >= 0 and self.variance >= 0):
            raise InvalidParameterError(
                f"mean and variance must be non-negative, got ({self.mean}, {self.variance})"
            )


@dataclass(frozen=True)
class PoissonZeroParams:
    """Zero weight ``p`` and rate ``lam`` of the translated Poisson part."""

    p: float
    lam: float

    family = Family.POISSON_ZERO

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0) or not (0.0 <= self.lam < math.inf):
            raise InvalidParameterError(f"invalid Poisson-zero parameters {self}")


@dataclass(frozen=True)
class GeometricZeroParams:
    """Zero weight ``p`` and success probability ``q`` of the translated geometric part."""

    p: float
    q: float

    family = Family.GEOMETRIC_ZERO

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0) or not (0.0 < self.q <= 1.0):
            raise InvalidParameterError(f"invalid geometric-zero parameters {self}")


NativeParams = "PoissonZeroParams | GeometricZeroParams"


def _check_native(family: Family, native) -> None:
    if getattr(native, "family", None) is not family:
        raise InvalidParameterError(
            f"{type(native).__name__} does not parametrise {family.value}"
        )


# ---------------------------------------------------------------------------
# vectorised kernels


def poisson_zero_to_moments(p, lam):
    p = np.asarray(p, dtype=float)
    lam = np.asarray(lam, dtype=float)
    mean = (1.0 - p) * (lam + 2.0)
    var = (1.0 - p) * (lam + p * (lam + 2.0) ** 2)
    return mean, var


def geometric_zero_to_moments(p, q):
    # Y = 2 + G with G geometric on {0, 1, ...}; the zero branch adds the
    # between-component term p(1-p)E[Y]^2.
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    ey = (1.0 + q) / q
    vy = (1.0 - q) / q**2
    mean = (1.0 - p) * ey
    var = (1.0 - p) * vy + p * (1.0 - p) * ey**2
    return mean, var


def poisson_zero_min_variance(mean):
    mean = np.asarray(mean, dtype=float)
    return np.where(mean <= 2.0, 2.0 * mean * (1.0 - mean / 2.0), mean - 2.0)


def poisson_zero_from_moments(mean, var):
    """Vectorised inverse transform; NaN where infeasible."""
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = var / mean
        k = ratio + mean - 1.0
        lam = 0.5 * (k + np.sqrt(k * k + 8.0)) - 2.0
        lam = np.maximum(lam, 0.0)
        p = np.clip(1.0 - mean / (lam + 2.0), 0.0, 1.0)
    bound = poisson_zero_min_variance(mean)
    ok = (mean > 0) & (var >= bound - _BOUNDARY_RTOL * np.maximum(1.0, mean)) & np.isfinite(var)
    zero = (mean == 0) & (var == 0)
    p = np.where(zero, 1.0, np.where(ok, p, np.nan))
    lam = np.where(zero, 0.0, np.where(ok, lam, np.nan))
    return p, lam


def geometric_zero_from_moments(mean, var):
    """Vectorised inverse transform; NaN where infeasible.

    Feasibility is decided constructively: invert, validate the native
    ranges, then require the forward map to reproduce the input.
    """
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a = var + 3.0 * mean + mean * mean
        disc = a * a - 16.0 * mean * mean
        disc = np.where(
            (disc < 0) & (disc > -_DISCRIMINANT_ATOL * np.maximum(1.0, a * a)), 0.0, disc
        )
        root = np.sqrt(disc)
        # a - sqrt(disc) rewritten to avoid cancellation when a >> mean
        one_minus_p = 4.0 * mean * mean / (a + root)
        p = 1.0 - one_minus_p
        # p slightly below zero is boundary rounding of the pure translated geometric
        p = np.where((p < 0.0) & (p > -_BOUNDARY_RTOL * 1e2), 0.0, p)
        one_minus_p = np.where(p == 0.0, 1.0, one_minus_p)
        ey = mean / one_minus_p
        q = 1.0 / (ey - 1.0)
        # q slightly above one is boundary rounding of the point mass at two
        q = np.where((q > 1.0) & (q < 1.0 + 1e-12), 1.0, q)
        m2, v2 = geometric_zero_to_moments(p, q)
        close = (np.abs(m2 - mean) <= ROUND_TRIP_RTOL * np.maximum(mean, 1e-300)) & (
            np.abs(v2 - var) <= ROUND_TRIP_RTOL * np.maximum(var, mean * mean) + 1e-300
        )
    ok = (
        (mean > 0)
        & (disc >= 0)
        & (p >= 0.0)
        & (p <= 1.0)
        & (q > 0.0)
        & (q <= 1.0)
        & close
    )
    zero = (mean == 0) & (var == 0)
    p = np.where(zero, 1.0, np.where(ok, p, np.nan))
    q = np.where(zero, 1.0, np.where(ok, q, np.nan))
    return p, q


# ---------------------------------------------------------------------------
# scalar API


def pmf(family: Family, native, x: int) -> float:
    """Probability of exactly ``x`` offspring."""
    family = Family.parse(family)
    _check_native(family, native)
    if x < 0 or int(x) != x:
        raise ValueError(f"offspring count must be a non-negative integer, got {x}")
    x = int(x)
    if x == 0:
        return float(native.p)
    if x == 1:
        return 0.0
    if native.p == 1.0:
        return 0.0
    j = x - 2
    if family is Family.POISSON_ZERO:
        lam = native.lam
        if lam == 0.0:
            return (1.0 - native.p) if j == 0 else 0.0
        return (1.0 - native.p) * math.exp(-lam + j * math.log(lam) - gammaln(j + 1))
    q = native.q
    if q == 1.0:
        return (1.0 - native.p) if j == 0 else 0.0
    return (1.0 - native.p) * q * math.exp(j * math.log1p(-q))


def _pgf(family: Family, native, s):
    if family is Family.POISSON_ZERO:
        return native.p + (1.0 - native.p) * s * s * np.exp(native.lam * (s - 1.0))
    return native.p + (1.0 - native.p) * s * s * native.q / (1.0 - (1.0 - native.q) * s)


def pgf(family: Family, native, s: float) -> float:
    """Probability generating function evaluated at ``s`` in [0, 1]."""
    family = Family.parse(family)
    _check_native(family, native)
    if not (0.0 <= s <= 1.0):
        raise ValueError(f"pgf argument must lie in [0, 1], got {s}")
    return float(_pgf(family, native, s))


def to_moments(family: Family, native) -> MomentPair:
    family = Family.parse(family)
    _check_native(family, native)
    if family is Family.POISSON_ZERO:
        mean, var = poisson_zero_to_moments(native.p, native.lam)
    else:
        mean, var = geometric_zero_to_moments(native.p, native.q)
    return MomentPair(float(mean), max(float(var), 0.0))


def from_moments(family: Family, moments: MomentPair, generation: int | None = None):
    """Native parameters of the family member with the given mean and variance.

    Raises `InfeasibleMomentsError` when no such member exists.
    """
    family = Family.parse(family)
    mean, var = float(moments.mean), float(moments.variance)
    if family is Family.POISSON_ZERO:
        p, lam = poisson_zero_from_moments(mean, var)
        if np.isnan(p):
            raise InfeasibleMomentsError(
                f"(mean={mean:.6g}, variance={var:.6g}) outside the Poisson-zero region",
                generation,
            )
        return PoissonZeroParams(float(p), float(lam))
    p, q = geometric_zero_from_moments(mean, var)
    if np.isnan(p):
        raise InfeasibleMomentsError(
            f"(mean={mean:.6g}, variance={var:.6g}) outside the geometric-zero region",
            generation,
        )
    return GeometricZeroParams(float(p), float(q))


def feasible_region(family: Family, moments: MomentPair) -> bool:
    """Whether some member of ``family`` has exactly these moments."""
    family = Family.parse(family)
    if family is Family.POISSON_ZERO:
        p, _ = poisson_zero_from_moments(moments.mean, moments.variance)
    else:
        p, _ = geometric_zero_from_moments(moments.mean, moments.variance)
    return bool(not np.isnan(p))


def min_variance(family: Family, mean: float) -> float:
    """Smallest attainable variance at ``mean`` (bisection for geometric-zero)."""
    family = Family.parse(family)
    if family is Family.POISSON_ZERO:
        return float(poisson_zero_min_variance(mean))
    if mean == 0:
        return 0.0
    lo, hi = 0.0, max(1.0, mean * mean + 4.0 * mean)
    while not feasible_region(family, MomentPair(mean, hi)):
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if feasible_region(family, MomentPair(mean, mid)):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14 * hi:
            break
    return hi


def draw(family: Family, native, rng: np.random.Generator, size=None):
    """Offspring counts for ``size`` independent vertices.

    One uniform per vertex decides the zero branch; the remaining vertices get
    2 plus a Poisson (numpy's inversion / PTRS sampler) or 2 plus a geometric
    number of failures.
    """
    n = 1 if size is None else int(size)
    out = np.zeros(n, dtype=np.int64)
    nonzero = rng.random(n) >= native.p
    k = int(nonzero.sum())
    if k:
        if family is Family.POISSON_ZERO:
            extra = rng.poisson(native.lam, k) if native.lam > 0 else np.zeros(k, np.int64)
        elif native.q == 1.0:
            extra = np.zeros(k, np.int64)
        else:
            extra = rng.geometric(native.q, k) - 1
        out[nonzero] = 2 + extra
    return int(out[0]) if size is None else out


def sample(family: Family, native, rng: np.random.Generator) -> int:
    """One offspring count; consumes ``rng`` deterministically."""
    family = Family.parse(family)
    _check_native(family, native)
    return draw(family, native, rng)
