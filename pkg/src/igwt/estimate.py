"""Likelihood of a tree corpus and maximum-likelihood fitting of a model.

The log-likelihood depends on the corpus only through the tallies
``N[n, k]`` (see `tally`), so a fit tallies once and every evaluation costs
O(generations) regardless of corpus size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln, xlogy
from scipy.stats import qmc

from .errors import NoFeasibleStartError
from .offspring import (
    Family,
    MomentPair,
    feasible_region,
    geometric_zero_from_moments,
    poisson_zero_from_moments,
)
from .structures import ModelSpec, StructureKind, StructureSpec, eval_structure, family_at
from .tree import SufficientStats, tally

__all__ = [
    "SufficientStats",
    "tally",
    "FitOptions",
    "FitResult",
    "FeasibilityEntry",
    "log_likelihood",
    "fit",
    "profile_feasibility",
]


class _Data:
    """Per-generation arrays derived once from the tallies."""

    def __init__(self, stats: SufficientStats):
        counts = stats.counts
        self.G = counts.shape[0]
        self.generations = np.arange(self.G)
        self.n0 = counts[:, 0].astype(float)
        self.has_one = bool(counts.shape[1] > 1 and counts[:, 1].any())
        self.a = stats.a.astype(float)
        self.b = stats.b.astype(float)
        k = np.arange(counts.shape[1])
        log_fact = np.where(k >= 2, gammaln(np.maximum(k - 1, 1)), 0.0)  # log((k-2)!)
        self.log_fact = (counts * log_fact).sum(axis=1)


def _loglik(mean: StructureSpec, variance: StructureSpec, families: np.ndarray, data: _Data) -> float:
    if data.has_one:
        return -math.inf
    n = data.generations
    mu = eval_structure(mean, n)
    var = eval_structure(variance, n)
    total = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        pois = families == 0
        if pois.any():
            p, lam = poisson_zero_from_moments(mu[pois], var[pois])
            if np.isnan(p).any():
                return -math.inf
            a, b = data.a[pois], data.b[pois]
            total += float(np.sum(
                xlogy(data.n0[pois], p) + xlogy(a, 1.0 - p) - a * lam + xlogy(b, lam)
                - data.log_fact[pois]
            ))
        geo = ~pois
        if geo.any():
            p, q = geometric_zero_from_moments(mu[geo], var[geo])
            if np.isnan(p).any():
                return -math.inf
            a, b = data.a[geo], data.b[geo]
            total += float(np.sum(
                xlogy(data.n0[geo], p) + xlogy(a, 1.0 - p) + xlogy(a, q) + xlogy(b, 1.0 - q)
            ))
    return total if not math.isnan(total) else -math.inf


def _family_codes(model: ModelSpec, G: int) -> np.ndarray:
    return np.array([0 if family_at(model, n) is Family.POISSON_ZERO else 1 for n in range(G)])


def log_likelihood(model: ModelSpec, stats: SufficientStats) -> float:
    """Full log-likelihood (constants included); ``-inf`` if the corpus is impossible."""
    data = _Data(stats)
    return _loglik(model.mean, model.variance, _family_codes(model, data.G), data)


@dataclass(frozen=True)
class FeasibilityEntry:
    generation: int
    count: int
    mean: float
    variance: float
    family: Family
    feasible: bool


def profile_feasibility(template: ModelSpec, stats: SufficientStats) -> list[FeasibilityEntry]:
    """Whether each observed generation's empirical offspring moments fit its family."""
    out = []
    for n in range(stats.n_generations):
        count, mean, var = stats.generation_moments(n)
        if count == 0:
            continue
        family = family_at(template, n)
        out.append(FeasibilityEntry(n, count, mean, var, family,
                                    feasible_region(family, MomentPair(mean, var))))
    return out


# ---------------------------------------------------------------------------
# fitting


@dataclass(frozen=True)
class FitOptions:
    n_starts: int = 16
    seed: int = 0
    start_spread: float = math.log(3.0)  # half-width of the start box, log scale
    fatol: float = 1e-8
    maxiter: int = 4000
    max_restarts: int = 8
    restart_tol: float = 1e-9
    boundary_floor: float = 1e-7  # parameters below this are tried at exactly zero


@dataclass(frozen=True)
class FitResult:
    model: ModelSpec
    log_likelihood: float
    converged: bool
    iterations: int
    restarts_used: int
    boundary: tuple[int, ...] = ()  # indices into theta pinned at zero
    start_log_likelihoods: tuple[float, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        out = self.model.to_dict()
        out["fit"] = {
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
            "restarts_used": self.restarts_used,
            "boundary": list(self.boundary),
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _weighted_exp_fit(n, values, weights):
    """Least-squares fit of log(value) = log(a) + n log(b)."""
    values = np.maximum(values, 1e-3)
    if len(n) == 1:
        return float(values[0]) / 0.5 ** n[0], 0.5
    w = np.sqrt(weights)
    X = np.column_stack([np.ones(len(n)), n]) * w[:, None]
    coef, *_ = np.linalg.lstsq(X, np.log(values) * w, rcond=None)
    return float(math.exp(coef[0])), float(math.exp(coef[1]))


def _structure_center(kind: StructureKind, n, values, weights) -> list[float]:
    """Rough data-informed parameters used to place the multi-start box."""
    floor = 1e-3
    if kind is StructureKind.CONSTANT:
        return [max(float(np.average(values, weights=weights)), floor)]
    if kind is StructureKind.EXP:
        return list(_weighted_exp_fit(n, values, weights))
    head = max(float(values[0]), floor) if n[0] == 0 else max(float(values.mean()), floor)
    later = n >= 1
    if not later.any():
        tail = [head, 0.5]
        offset = 0.5 * head
    else:
        offset = 0.5 * float(values[later].min())
        shifted = values[later] - (offset if kind is StructureKind.ANCHORED_EXP_CONST else 0.0)
        tail = list(_weighted_exp_fit(n[later], shifted, weights[later]))
    if kind is StructureKind.ANCHORED_EXP:
        return [head] + tail
    return [head] + tail + [max(offset, floor)]


def _centers(template: ModelSpec, stats: SufficientStats) -> np.ndarray:
    rows = [stats.generation_moments(n) for n in range(stats.n_generations)]
    keep = [i for i, r in enumerate(rows) if r[0] > 0]
    n = np.array(keep)
    weights = np.array([rows[i][0] for i in keep], dtype=float)
    means = np.array([rows[i][1] for i in keep])
    variances = np.array([rows[i][2] for i in keep])
    # the variance start is padded so Poisson-zero starts sit inside the region
    variances = np.maximum(variances, 2.0 * means)
    phi = _structure_center(template.mean.kind, n, means, weights)
    psi = _structure_center(template.variance.kind, n, variances, weights)
    return np.log(np.maximum(np.array(phi + psi), 1e-3))


def _start_points(center: np.ndarray, options: FitOptions) -> np.ndarray:
    dim = len(center)
    if options.n_starts <= 1:
        return center[None, :]
    halton = qmc.Halton(d=dim, scramble=True, seed=options.seed)
    unit = halton.random(options.n_starts - 1)
    box = center + options.start_spread * (2.0 * unit - 1.0)
    return np.vstack([center, box])


def fit(stats: SufficientStats, template: ModelSpec, options: FitOptions | None = None) -> FitResult:
    """Maximise the log-likelihood over non-negative structure parameters.

    ``template`` fixes the family assignment and the structure kinds; its
    parameter values are ignored.  Search runs in log-parameter space with
    Nelder-Mead from a deterministic set of starts, then restarts from the
    best point until the objective stops improving.
    """
    options = options or FitOptions()
    data = _Data(stats)
    families = _family_codes(template, data.G)
    k = template.mean.kind.n_params
    mean_kind, var_kind = template.mean.kind, template.variance.kind

    def loglik_theta(theta) -> float:
        try:
            mean = StructureSpec(mean_kind, tuple(theta[:k]))
            var = StructureSpec(var_kind, tuple(theta[k:]))
        except ValueError:
            return -math.inf
        return _loglik(mean, var, families, data)

    def objective(u) -> float:
        if not np.all(np.isfinite(u)) or np.any(u > 700):
            return math.inf
        ll = loglik_theta(np.exp(u))
        return -ll if ll > -math.inf else math.inf

    def run(u0):
        dim = len(u0)
        simplex = np.vstack([u0, u0 + 0.25 * np.eye(dim)])
        res = minimize(objective, u0, method="Nelder-Mead", options={
            "initial_simplex": simplex,
            "fatol": options.fatol,
            "xatol": 1e300,
            "maxiter": options.maxiter,
            "maxfev": 4 * options.maxiter,
            "adaptive": True,
        })
        return res

    starts = _start_points(_centers(template, stats), options)
    start_ll = tuple(-objective(u) if objective(u) < math.inf else -math.inf for u in starts)
    if all(v == -math.inf for v in start_ll):
        raise NoFeasibleStartError("no multi-start point has positive likelihood")

    iterations = 0
    best_u, best_f, best_ok = None, math.inf, False
    for u0, ll0 in zip(starts, start_ll):
        if ll0 == -math.inf:
            continue
        res = run(u0)
        iterations += res.nit
        # strict improvement keeps the earliest start on ties
        if res.fun < best_f:
            best_u, best_f, best_ok = res.x, res.fun, res.success

    restarts = 0
    for _ in range(options.max_restarts):
        res = run(best_u)
        iterations += res.nit
        restarts += 1
        gain = best_f - res.fun
        if res.fun < best_f:
            best_u, best_f = res.x, res.fun
        best_ok = res.success
        if gain <= options.restart_tol:
            break
    else:
        best_ok = False

    theta = np.exp(best_u)
    best_ll = -best_f
    boundary = []
    for i in np.argsort(theta):
        if theta[i] >= options.boundary_floor:
            break
        trial = theta.copy()
        trial[i] = 0.0
        ll = loglik_theta(trial)
        if ll >= best_ll:
            theta, best_ll = trial, ll
            boundary.append(int(i))
    if boundary:
        best_ok = True

    return FitResult(
        model=template.with_theta(theta),
        log_likelihood=float(best_ll),
        converged=bool(best_ok),
        iterations=int(iterations),
        restarts_used=restarts,
        boundary=tuple(sorted(boundary)),
        start_log_likelihoods=start_ll,
    )
