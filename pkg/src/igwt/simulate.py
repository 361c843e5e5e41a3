"""Generation-by-generation sampling of inhomogeneous Galton-Watson trees.

Replicate ``i`` of an ensemble draws from its own generator seeded by
``SeedSequence(seed, spawn_key=(i,))``, so corpora are reproducible no
matter how replicates are scheduled.  Vertex ids are breadth-first, which
makes the serialised form canonical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleMomentsError, SimulationGuardError
from .offspring import MomentPair, draw, from_moments, min_variance
from .structures import ModelSpec, family_at, moments_at
from .tree import OrderedTree

__all__ = ["SimConfig", "substream", "sample_tree", "sample_ensemble", "GenerationSampler"]

INFEASIBLE_POLICIES = ("raise", "boundary")


@dataclass(frozen=True)
class SimConfig:
    """Seed and runaway guards.

    ``infeasible`` decides what happens when a tree reaches a generation whose
    (mean, variance) has no member in its family: ``"raise"`` aborts, while
    ``"boundary"`` keeps the mean and lifts the variance to the family's
    minimum at that mean.
    """

    seed: int = 0
    max_vertices: int = 1_000_000
    max_generations: int = 10_000
    infeasible: str = "raise"

    def __post_init__(self):
        if self.max_vertices <= 0 or self.max_generations <= 0:
            raise ValueError("guards must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.infeasible not in INFEASIBLE_POLICIES:
            raise ValueError(f"infeasible policy must be one of {INFEASIBLE_POLICIES}")


def substream(seed: int, replicate: int) -> np.random.Generator:
    """Independent generator for replicate ``replicate`` of seed ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))))


class GenerationSampler:
    """Caches per-generation native parameters, resolved only when reached."""

    def __init__(self, model: ModelSpec, infeasible: str = "raise"):
        self.model = model
        self.infeasible = infeasible
        self._cache: dict[int, tuple] = {}

    def native(self, n: int):
        hit = self._cache.get(n)
        if hit is None:
            family = family_at(self.model, n)
            moments = moments_at(self.model, n)
            try:
                native = from_moments(family, moments, generation=n)
            except InfeasibleMomentsError:
                if self.infeasible != "boundary":
                    raise
                lifted = MomentPair(moments.mean, min_variance(family, moments.mean))
                native = from_moments(family, lifted, generation=n)
            hit = self._cache[n] = (family, native)
        return hit

    def draw(self, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
        family, native = self.native(n)
        return draw(family, native, rng, size)


def _grow(sampler: GenerationSampler, config: SimConfig, rng: np.random.Generator) -> OrderedTree:
    parents = [np.array([-1], dtype=np.int64)]
    gens = [np.zeros(1, dtype=np.int64)]
    ids = np.zeros(1, dtype=np.int64)
    total = 1
    n = 0
    while True:
        counts = sampler.draw(n, len(ids), rng)
        born = int(counts.sum())
        if born == 0:
            break
        total += born
        if total > config.max_vertices:
            raise SimulationGuardError(f"tree exceeded {config.max_vertices} vertices")
        if n + 1 > config.max_generations:
            raise SimulationGuardError(f"tree exceeded {config.max_generations} generations")
        parents.append(np.repeat(ids, counts))
        gens.append(np.full(born, n + 1, dtype=np.int64))
        ids = np.arange(total - born, total, dtype=np.int64)
        n += 1
    return OrderedTree(tuple(np.concatenate(parents).tolist()), tuple(np.concatenate(gens).tolist()))


def sample_tree(model: ModelSpec, config: SimConfig | None = None,
                rng: np.random.Generator | None = None) -> OrderedTree:
    """One tree; ``rng`` defaults to substream 0 of ``config.seed``."""
    config = config or SimConfig()
    if rng is None:
        rng = substream(config.seed, 0)
    return _grow(GenerationSampler(model, config.infeasible), config, rng)


def sample_ensemble(model: ModelSpec, count: int, config: SimConfig | None = None) -> list[OrderedTree]:
    """``count`` independent trees in replicate order."""
    if count < 1:
        raise ValueError("count must be at least 1")
    config = config or SimConfig()
    sampler = GenerationSampler(model, config.infeasible)
    trees = []
    for i in range(count):
        try:
            trees.append(_grow(sampler, config, substream(config.seed, i)))
        except SimulationGuardError as exc:
            raise SimulationGuardError(str(exc), replicate=i) from exc
        except InfeasibleMomentsError as exc:
            err = InfeasibleMomentsError(f"replicate {i}: {exc}")
            err.generation = exc.generation
            raise err from exc
    return trees
