import numpy as np
import pytest

from igwt import (
    Family,
    InfeasibleMomentsError,
    ModelSpec,
    SimConfig,
    SimulationGuardError,
    StructureKind,
    StructureSpec,
    generation_moments,
    grid_model,
    sample_ensemble,
    sample_tree,
    serialize_corpus,
    substream,
    summarize,
)
from igwt.check import sample_summary
from igwt.offspring import min_variance

K = StructureKind


def test_same_seed_same_corpus():
    a = serialize_corpus(sample_ensemble(grid_model(), 300, SimConfig(seed=5)))
    b = serialize_corpus(sample_ensemble(grid_model(), 300, SimConfig(seed=5)))
    c = serialize_corpus(sample_ensemble(grid_model(), 300, SimConfig(seed=6)))
    assert a == b != c


def test_replicates_do_not_depend_on_ensemble_size():
    small = sample_ensemble(grid_model(), 10, SimConfig(seed=2))
    big = sample_ensemble(grid_model(), 50, SimConfig(seed=2))
    assert big[:10] == small
    assert sample_tree(grid_model(), SimConfig(seed=2)) == small[0]
    assert sample_tree(grid_model(), rng=substream(2, 7)) == small[7]


def test_trees_are_breadth_first():
    for t in sample_ensemble(grid_model(), 50, SimConfig(seed=1)):
        assert list(t.generation) == sorted(t.generation)
        assert list(t.parents[1:]) == sorted(t.parents[1:])


def test_generation_sizes_match_analytic_moments():
    trees = sample_ensemble(grid_model(), 20_000, SimConfig(seed=8))
    for n in range(1, 5):
        z = [t.generation_sizes()[n] if n <= t.height else 0 for t in trees]
        mean, var, se_mean, se_var = sample_summary(z)
        m, s2 = generation_moments(grid_model(), n)
        assert abs(mean - m) < 4 * se_mean
        assert abs(var - s2) < 4 * se_var


def test_guards():
    huge = ModelSpec(Family.GEOMETRIC_ZERO, StructureSpec(K.CONSTANT, (1.5,)),
                     StructureSpec(K.CONSTANT, (1.0,)))
    with pytest.raises(SimulationGuardError) as info:
        sample_ensemble(huge, 3, SimConfig(seed=0, max_vertices=1000))
    assert info.value.replicate == 0
    chain = ModelSpec(Family.GEOMETRIC_ZERO, StructureSpec(K.CONSTANT, (2.0,)),
                      StructureSpec(K.CONSTANT, (0.0,)))
    with pytest.raises(SimulationGuardError, match="generations"):
        sample_tree(chain, SimConfig(max_generations=5))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(max_vertices=0)
    with pytest.raises(ValueError):
        SimConfig(seed=-1)
    with pytest.raises(ValueError):
        SimConfig(infeasible="ignore")
    with pytest.raises(ValueError):
        sample_ensemble(grid_model(), 0)


def _infeasible_at_one():
    # generation 1 asks for variance 0.1 at mean 0.5, below every geometric-zero member
    return ModelSpec(Family.GEOMETRIC_ZERO, StructureSpec(K.ANCHORED_EXP, (3.0, 0.5, 1.0)),
                     StructureSpec(K.ANCHORED_EXP, (3.0, 0.1, 0.0)),
                     {0: Family.POISSON_ZERO})


def test_reaching_an_infeasible_generation_raises():
    with pytest.raises(InfeasibleMomentsError) as info:
        sample_ensemble(_infeasible_at_one(), 5, SimConfig(seed=0))
    assert info.value.generation == 1


def test_boundary_policy_lifts_the_variance():
    trees = sample_ensemble(_infeasible_at_one(), 4000, SimConfig(seed=0, infeasible="boundary"))
    kids = np.concatenate([t.offspring_counts()[np.asarray(t.generation) == 1] for t in trees])
    assert kids.mean() == pytest.approx(0.5, abs=0.05)
    assert kids.var() == pytest.approx(min_variance(Family.GEOMETRIC_ZERO, 0.5), abs=0.1)
    assert all(summarize(t).height <= 40 for t in trees)
