"""Analytical moments of generation sizes, tree size, leaf counts and height.

Per-generation quantities are finite products and sums.  Whole-tree
quantities are infinite series over generations; they are truncated once
the remaining tail is bounded below ``tol`` using the certified
sub-critical ratio of the mean structure.

Leaf and height results need each generation's zero probability (or pgf),
so they stop at the first generation whose (mean, variance) is outside its
family's region.  That is accepted only when the expected number of
vertices from that generation on is below ``mass_tol``; the bound is
reported as ``neglected_mass``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import FinitenessError, InfeasibleMomentsError, TruncationError
from .offspring import pgf as family_pgf
from .structures import (
    ModelSpec,
    eval_structure,
    family_at,
    finiteness_certificate,
    native_at,
    tail_sup,
)

__all__ = [
    "DEFAULT_TOL",
    "MAX_GENERATIONS",
    "MomentReport",
    "generation_moments",
    "generation_cov",
    "total_moments",
    "leaf_generation_moments",
    "leaf_generation_cov",
    "leaf_total_moments",
    "height_distribution",
    "correlated_gen2_variance",
    "moment_report",
]

DEFAULT_TOL = 1e-12
DEFAULT_MASS_TOL = 1e-4
MAX_GENERATIONS = 100_000


def _mu(model: ModelSpec, n):
    return eval_structure(model.mean, n)


def _sigma2(model: ModelSpec, n):
    return eval_structure(model.variance, n)


def generation_moments(model: ModelSpec, n: int) -> tuple[float, float]:
    """Mean and variance of the number of generation-``n`` vertices."""
    if n < 0:
        raise ValueError("generation index must be non-negative")
    mu = _mu(model, np.arange(n)) if n else np.empty(0)
    sigma2 = _sigma2(model, np.arange(n)) if n else np.empty(0)
    m_n = float(np.prod(mu))
    s2 = 0.0
    for i in range(n):
        s2 += sigma2[i] * np.prod(mu[:i]) * np.prod(mu[i + 1:] ** 2)
    return m_n, float(s2)


def _mean_ratio(model: ModelSpec, n: int, k: int) -> float:
    """m_{n+k} / m_n computed as a product, so it is defined when m_n = 0."""
    return float(np.prod(_mu(model, np.arange(n, n + k))))


def generation_cov(model: ModelSpec, n: int, k: int) -> float:
    """cov(Z_n, Z_{n+k}) for k > 0."""
    if k <= 0:
        raise ValueError("k must be positive")
    m_n, s2_n = generation_moments(model, n)
    if m_n == 0 and s2_n > 0:
        raise ArithmeticError("zero mean with positive variance")
    return s2_n * _mean_ratio(model, n, k)


def _zero_prob(model: ModelSpec, n: int) -> float:
    return native_at(model, n).p


def leaf_generation_moments(model: ModelSpec, n: int) -> tuple[float, float]:
    """Mean and variance of the number of childless generation-``n`` vertices."""
    m_n, s2_n = generation_moments(model, n)
    p = _zero_prob(model, n)
    return m_n * p, s2_n * p * p + m_n * p * (1.0 - p)


def leaf_generation_cov(model: ModelSpec, n: int, k: int) -> float:
    """cov of childless-vertex counts in generations ``n`` and ``n + k``."""
    if k <= 0:
        raise ValueError("k must be positive")
    m_n, s2_n = generation_moments(model, n)
    if m_n == 0:
        return 0.0
    m_nk = m_n * _mean_ratio(model, n, k)
    return _zero_prob(model, n + k) * _zero_prob(model, n) * m_nk * (s2_n / m_n - 1.0)


# ---------------------------------------------------------------------------
# truncated whole-tree sums


@dataclass
class _Table:
    """Generation arrays 0..N-1 built by the one-step recursions."""

    mu: np.ndarray
    sigma2: np.ndarray
    m: np.ndarray
    s2: np.ndarray
    mean_tail: float  # bound on sum_{n >= N} m_n
    var_tail: float  # extrapolated bound on the neglected variance terms
    n_tilde: int

    @property
    def size(self) -> int:
        return len(self.m)


def _build_table(model: ModelSpec, tol: float, max_generations: int = MAX_GENERATIONS) -> _Table:
    cert = finiteness_certificate(model.mean)
    if cert is None:
        raise FinitenessError(
            "mean structure is not certified sub-critical; whole-tree sums may diverge"
        )
    n_tilde, _ = cert
    m = [1.0]
    s2 = [0.0]
    mu = []
    sigma2 = []
    prev_term = None
    n = 0
    while True:
        mu.append(_mu(model, n))
        sigma2.append(_sigma2(model, n))
        m.append(m[n] * mu[n])
        s2.append(sigma2[n] * m[n] + mu[n] ** 2 * s2[n])
        n += 1
        # m and s2 now hold generations 0..n; test whether 0..n-1 suffice
        if n > n_tilde:
            c = tail_sup(model.mean, n)
            if c < 1.0:
                mean_tail = m[n] / (1.0 - c)
                # s_k^2 + 2 (s_k^2 / m_k) sum_{j>k} m_j <= s_k^2 (1 + 2c / (1 - c))
                term = s2[n] * (1.0 + 2.0 * c / (1.0 - c)) if m[n] > 0 else 0.0
                ratio = 0.0 if term == 0 else (term / prev_term if prev_term else math.inf)
                prev_term = term
                if mean_tail < tol and term < tol and ratio < 1.0:
                    var_tail = term / (1.0 - ratio)
                    break
        if n >= max_generations:
            raise TruncationError(
                f"tail did not fall below {tol:g} within {max_generations} generations"
            )
    return _Table(
        mu=np.array(mu),
        sigma2=np.array(sigma2),
        m=np.array(m[:n]),
        s2=np.array(s2[:n]),
        mean_tail=mean_tail,
        var_tail=var_tail,
        n_tilde=n_tilde,
    )


def _suffix(values: np.ndarray) -> np.ndarray:
    """out[n] = sum_{k > n} values[k]."""
    out = np.zeros_like(values)
    if len(values) > 1:
        out[:-1] = np.cumsum(values[::-1])[::-1][1:]
    return out


def _totals(table: _Table) -> tuple[float, float]:
    m, s2 = table.m, table.s2
    later = _suffix(m) + table.mean_tail
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(m > 0, s2 + 2.0 * (s2 / m) * later, 0.0)
    return float(m.sum() + table.mean_tail), float(terms[1:].sum() + table.var_tail)


def total_moments(model: ModelSpec, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Mean and variance of the total number of vertices."""
    return _totals(_build_table(model, tol))


@dataclass
class _LeafColumn:
    p: np.ndarray  # zero probabilities for generations 0..L-1
    natives: list
    infeasible_generation: int | None
    neglected_mass: float


def _leaf_column(model: ModelSpec, table: _Table, mass_tol: float) -> _LeafColumn:
    natives = []
    infeasible = None
    for n in range(table.size):
        try:
            natives.append(native_at(model, n))
        except InfeasibleMomentsError:
            infeasible = n
            break
    neglected = 0.0
    if infeasible is not None:
        neglected = float(table.m[infeasible:].sum() + table.mean_tail)
        if neglected > mass_tol:
            raise InfeasibleMomentsError(
                f"moments infeasible while {neglected:.3g} expected vertices remain",
                infeasible,
            )
    return _LeafColumn(np.array([nat.p for nat in natives]), natives, infeasible, neglected)


def _leaf_totals(table: _Table, col: _LeafColumn) -> tuple[float, float]:
    L = len(col.p)
    m, s2, p = table.m[:L], table.s2[:L], col.p
    pm = p * m
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(m > 0, s2 / m, 0.0)
    later = _suffix(pm)
    terms = np.where(m > 0, p * (m + (ratio - 1.0) * (m * p + 2.0 * later)), 0.0)
    return float(pm.sum()), float(terms.sum())


def leaf_total_moments(
    model: ModelSpec, tol: float = DEFAULT_TOL, mass_tol: float = DEFAULT_MASS_TOL
) -> tuple[float, float]:
    """Mean and variance of the total number of leaves."""
    table = _build_table(model, tol)
    return _leaf_totals(table, _leaf_column(model, table, mass_tol))


def _height(model: ModelSpec, table: _Table, col: _LeafColumn, tol: float):
    families = [family_at(model, n) for n in range(len(col.natives))]
    cdf = []
    for n in range(len(col.natives)):
        a = 0.0
        for j in range(n, -1, -1):
            a = family_pgf(families[j], col.natives[j], a)
        cdf.append(a)
        if 1.0 - a < tol:
            break
    cdf = np.array(cdf)
    survival = 1.0 - cdf
    idx = np.arange(len(cdf))
    mean = float(survival.sum())
    var = float(((2 * idx + 1) * survival).sum() - mean * mean)
    return cdf, mean, max(var, 0.0)


def height_distribution(
    model: ModelSpec, tol: float = DEFAULT_TOL, mass_tol: float = DEFAULT_MASS_TOL
) -> tuple[np.ndarray, float, float]:
    """CDF P(N_max <= n) for n = 0, 1, ..., plus E(N_max) and Var(N_max).

    ``P(N_max <= n) = g_0(g_1(...g_n(0)))``, composed from the innermost pgf
    outwards.
    """
    table = _build_table(model, tol)
    return _height(model, table, _leaf_column(model, table, mass_tol), tol)


def correlated_gen2_variance(mu0: float, sigma2_0: float, mu1: float, sigma2_1: float,
                             rho: float) -> float:
    """Var(Z_2) when generation-1 offspring counts share pairwise correlation ``rho``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if min(mu0, sigma2_0, mu1, sigma2_1) < 0:
        raise ValueError("moments must be non-negative")
    return sigma2_1 * mu0 + (sigma2_0 + mu0 * mu0 - mu0) * sigma2_1 * rho + sigma2_0 * mu1 * mu1


@dataclass(frozen=True)
class MomentReport:
    gen_mean: np.ndarray
    gen_var: np.ndarray
    total_mean: float
    total_var: float
    leaf_gen_mean: np.ndarray
    leaf_gen_var: np.ndarray
    leaf_total_mean: float
    leaf_total_var: float
    height_cdf: np.ndarray
    height_mean: float
    height_var: float
    truncation_generation: int
    truncation_tol: float
    infeasible_generation: int | None = None
    neglected_mass: float = 0.0

    def summary(self) -> dict:
        return {
            "total_mean": self.total_mean,
            "total_var": self.total_var,
            "height_mean": self.height_mean,
            "height_var": self.height_var,
            "leaf_total_mean": self.leaf_total_mean,
            "leaf_total_var": self.leaf_total_var,
            "truncation_generation": self.truncation_generation,
            "truncation_tol": self.truncation_tol,
            "infeasible_generation": self.infeasible_generation,
            "neglected_mass": self.neglected_mass,
        }

    def generations_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["generation", "m_n", "s2_n", "leaf_m_n", "leaf_s2_n", "height_cdf"])

        def cell(arr, n):
            return repr(float(arr[n])) if n < len(arr) else ""

        for n in range(len(self.gen_mean)):
            writer.writerow([n, cell(self.gen_mean, n), cell(self.gen_var, n),
                             cell(self.leaf_gen_mean, n), cell(self.leaf_gen_var, n),
                             cell(self.height_cdf, n)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["statistic", "value"])
        for key, value in self.summary().items():
            writer.writerow([key, "" if value is None else repr(value)])
        return buf.getvalue()


def moment_report(
    model: ModelSpec, tol: float = DEFAULT_TOL, mass_tol: float = DEFAULT_MASS_TOL
) -> MomentReport:
    table = _build_table(model, tol)
    col = _leaf_column(model, table, mass_tol)
    total_mean, total_var = _totals(table)
    leaf_mean, leaf_var = _leaf_totals(table, col)
    cdf, h_mean, h_var = _height(model, table, col, tol)
    L = len(col.p)
    m, s2, p = table.m[:L], table.s2[:L], col.p
    return MomentReport(
        gen_mean=table.m.copy(),
        gen_var=table.s2.copy(),
        total_mean=total_mean,
        total_var=total_var,
        leaf_gen_mean=m * p,
        leaf_gen_var=s2 * p * p + m * p * (1.0 - p),
        leaf_total_mean=leaf_mean,
        leaf_total_var=leaf_var,
        height_cdf=cdf,
        height_mean=h_mean,
        height_var=h_var,
        truncation_generation=table.size,
        truncation_tol=tol,
        infeasible_generation=col.infeasible_generation,
        neglected_mass=col.neglected_mass,
    )
