"""Model checking: data vs. simulation vs. analytical summaries.

Produces the three-column comparison of tree size, height and leaf count,
per-generation moment comparisons with bootstrap intervals, and empirical
CDFs with point-wise normal-approximation bands, all as plot-ready data.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .moments import DEFAULT_MASS_TOL, DEFAULT_TOL, moment_report
from .simulate import SimConfig, sample_ensemble
from .structures import ModelSpec, eval_structure
from .tree import OrderedTree, summarize

__all__ = [
    "ECDF",
    "ecdf_with_band",
    "GenerationMoments",
    "empirical_generation_moments",
    "SummaryRow",
    "CheckReport",
    "check",
    "sample_summary",
]


@dataclass(frozen=True)
class ECDF:
    """Right-continuous step function with a point-wise band at its jumps."""

    x: np.ndarray
    cdf: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n: int
    level: float

    def __call__(self, value):
        idx = np.searchsorted(self.x, value, side="right")
        padded = np.concatenate([[0.0], self.cdf])
        return padded[idx]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "cdf", "lower", "upper"])
        for row in zip(self.x, self.cdf, self.lower, self.upper):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def ecdf_with_band(samples, level: float = 0.95) -> ECDF:
    """ECDF of ``samples`` with band ``F +/- z sqrt(F(1-F)/n)`` clipped to [0, 1]."""
    values = np.sort(np.asarray(samples, dtype=float))
    if values.size == 0:
        raise ValueError("ECDF needs at least one sample")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    n = values.size
    x = np.unique(values)
    cdf = np.searchsorted(values, x, side="right") / n
    half = norm.ppf(0.5 + level / 2.0) * np.sqrt(cdf * (1.0 - cdf) / n)
    return ECDF(x, cdf, np.clip(cdf - half, 0.0, 1.0), np.clip(cdf + half, 0.0, 1.0), n, level)


@dataclass(frozen=True)
class GenerationMoments:
    generation: int
    count: int
    mean: float
    variance: float
    ci_mean: tuple[float, float]
    ci_variance: tuple[float, float]


def _observations(trees, n: int, what: str) -> np.ndarray:
    if what == "offspring":
        parts = [t.offspring_counts()[np.asarray(t.generation) == n] for t in trees]
        return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    if what == "size":
        return np.array([t.generation_sizes()[n] if n <= t.height else 0 for t in trees])
    raise ValueError("what must be 'offspring' or 'size'")


def _bootstrap(values: np.ndarray, resamples: int, level: float, rng) -> tuple:
    # resample the empirical frequencies; equivalent to resampling values
    support, freq = np.unique(values, return_counts=True)
    total = values.size
    draws = rng.multinomial(total, freq / total, size=resamples)
    means = draws @ support / total
    second = draws @ (support.astype(float) ** 2) / total
    variances = (second - means**2) * total / (total - 1)
    lo, hi = 50.0 * (1.0 - level), 50.0 * (1.0 + level)
    ci_mean = tuple(float(v) for v in np.percentile(means, [lo, hi]))
    ci_var = tuple(float(v) for v in np.percentile(np.maximum(variances, 0.0), [lo, hi]))
    return ci_mean, ci_var


def empirical_generation_moments(
    trees, n: int, what: str = "offspring", resamples: int = 1000,
    level: float = 0.95, seed: int = 0,
) -> GenerationMoments:
    """Sample mean/variance at generation ``n`` with percentile-bootstrap intervals.

    ``what="offspring"`` pools the offspring counts of all generation-``n``
    vertices; ``what="size"`` uses the generation size ``z_n`` of every tree.
    """
    values = _observations(trees, n, what)
    if values.size == 0:
        raise ValueError(f"no observations at generation {n}")
    if values.size < 2:
        raise ValueError(f"variance undefined from a single observation at generation {n}")
    mean = float(values.mean())
    var = float(values.var(ddof=1))
    if np.all(values == values[0]):
        return GenerationMoments(n, values.size, mean, 0.0, (mean, mean), (0.0, 0.0))
    rng = np.random.default_rng(seed)
    ci_mean, ci_var = _bootstrap(values, resamples, level, rng)
    return GenerationMoments(n, int(values.size), mean, var, ci_mean, ci_var)


@dataclass(frozen=True)
class SummaryRow:
    statistic: str
    data: tuple[float, float]
    simulation: tuple[float, float]
    simulation_se: tuple[float, float]
    analytical: tuple[float, float]


def sample_summary(values) -> tuple[float, float, float, float]:
    """Mean, variance and their Monte Carlo standard errors."""
    x = np.asarray(values, dtype=float)
    n = x.size
    mean = float(x.mean())
    var = float(x.var(ddof=1)) if n > 1 else 0.0
    m4 = float(np.mean((x - mean) ** 4))
    se_mean = float(np.sqrt(var / n))
    se_var = float(np.sqrt(max(m4 - var * var * (n - 3) / (n - 1), 0.0) / n))
    return mean, var, se_mean, se_var


def _triples(trees):
    summaries = [summarize(t) for t in trees]
    return {
        "Z": np.array([s.total_vertices for s in summaries]),
        "N_max": np.array([s.height for s in summaries]),
        "leaves": np.array([s.leaves for s in summaries]),
    }


@dataclass(frozen=True)
class CheckReport:
    table: tuple[SummaryRow, ...]
    generation_sizes: tuple[dict, ...]
    offspring: tuple[dict, ...]
    ecdfs: dict
    replicates: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "replicates": self.replicates,
            "seed": self.seed,
            "table": [
                {"statistic": r.statistic, "data": list(r.data), "simulation": list(r.simulation),
                 "simulation_se": list(r.simulation_se), "analytical": list(r.analytical)}
                for r in self.table
            ],
            "generation_sizes": list(self.generation_sizes),
            "offspring": list(self.offspring),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def csv_files(self) -> dict[str, str]:
        files = {f"ecdf_{name}.csv": e.to_csv() for name, e in self.ecdfs.items()}
        files["table.csv"] = _rows_csv(
            ["statistic", "data_mean", "data_var", "sim_mean", "sim_var", "sim_se_mean",
             "sim_se_var", "analytic_mean", "analytic_var"],
            [[r.statistic, *r.data, *r.simulation, *r.simulation_se, *r.analytical]
             for r in self.table],
        )
        for name, rows in (("generation_sizes", self.generation_sizes), ("offspring", self.offspring)):
            if rows:
                keys = list(rows[0])
                files[f"{name}.csv"] = _rows_csv(keys, [[row[k] for k in keys] for row in rows])
        return files


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else ("" if v is None else repr(float(v)))
                    for v in row])
    return buf.getvalue()


def _generation_rows(trees, what, analytic_mean, analytic_var, seed, n_max):
    rows = []
    for n in range(n_max + 1):
        try:
            gm = empirical_generation_moments(trees, n, what, seed=seed + n)
        except ValueError:
            continue
        rows.append({
            "generation": n, "count": gm.count, "mean": gm.mean, "variance": gm.variance,
            "ci_mean_lo": gm.ci_mean[0], "ci_mean_hi": gm.ci_mean[1],
            "ci_var_lo": gm.ci_variance[0], "ci_var_hi": gm.ci_variance[1],
            "model_mean": analytic_mean(n), "model_variance": analytic_var(n),
        })
    return tuple(rows)


def check(model: ModelSpec, data: list[OrderedTree], replicates: int = 10_000, seed: int = 0,
          tol: float = DEFAULT_TOL, infeasible: str = "raise",
          mass_tol: float = DEFAULT_MASS_TOL) -> CheckReport:
    """Compare a corpus with simulations from ``model`` and its analytical moments."""
    if not data:
        raise ValueError("data corpus is empty")
    report = moment_report(model, tol, mass_tol)
    sims = sample_ensemble(model, replicates, SimConfig(seed=seed, infeasible=infeasible))
    d, s = _triples(data), _triples(sims)
    analytic = {
        "Z": (report.total_mean, report.total_var),
        "N_max": (report.height_mean, report.height_var),
        "leaves": (report.leaf_total_mean, report.leaf_total_var),
    }
    table = []
    for key in ("Z", "N_max", "leaves"):
        dm, dv, _, _ = sample_summary(d[key])
        sm, sv, sem, sev = sample_summary(s[key])
        table.append(SummaryRow(key, (dm, dv), (sm, sv), (sem, sev), analytic[key]))

    n_max = int(d["N_max"].max())

    def gen_m(n):
        return float(report.gen_mean[n]) if n < len(report.gen_mean) else 0.0

    def gen_v(n):
        return float(report.gen_var[n]) if n < len(report.gen_var) else 0.0

    sizes = _generation_rows(data, "size", gen_m, gen_v, seed, n_max)
    offspring = _generation_rows(
        data, "offspring",
        lambda n: eval_structure(model.mean, n), lambda n: eval_structure(model.variance, n),
        seed, n_max,
    )
    cdf = report.height_cdf
    height_model = ECDF(np.arange(len(cdf), dtype=float), cdf, cdf, cdf, 0, 1.0)
    ecdfs = {
        "total_vertices_data": ecdf_with_band(d["Z"]),
        "total_vertices_simulation": ecdf_with_band(s["Z"]),
        "height_data": ecdf_with_band(d["N_max"]),
        "height_model": height_model,
        "leaves_data": ecdf_with_band(d["leaves"]),
        "leaves_simulation": ecdf_with_band(s["leaves"]),
    }
    return CheckReport(tuple(table), sizes, offspring, ecdfs, replicates, seed)
