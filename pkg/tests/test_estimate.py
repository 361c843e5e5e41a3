import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from igwt import (
    Family,
    FitOptions,
    ModelSpec,
    NoFeasibleStartError,
    OrderedTree,
    SimConfig,
    StructureKind,
    StructureSpec,
    fit,
    grid_model,
    log_likelihood,
    profile_feasibility,
    sample_ensemble,
    tally,
)
from igwt.structures import family_at, native_at

from oracles import direct_log_likelihood

K = StructureKind


def direct(model, trees):
    return direct_log_likelihood(trees, lambda n: family_at(model, n).value,
                                 lambda n: native_at(model, n))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60))
def test_tallied_likelihood_matches_per_vertex_sum(seed, count):
    m = grid_model()
    trees = sample_ensemble(m, count, SimConfig(seed=seed))
    assert log_likelihood(m, tally(trees)) == pytest.approx(direct(m, trees), rel=1e-9)


def test_poisson_model_likelihood_including_constants():
    m = ModelSpec(Family.POISSON_ZERO, StructureSpec(K.EXP, (3.0, 0.5)),
                  StructureSpec(K.EXP, (4.0, 0.7)))
    trees = sample_ensemble(m, 200, SimConfig(seed=3))
    assert log_likelihood(m, tally(trees)) == pytest.approx(direct(m, trees), rel=1e-12)


def test_likelihood_adds_over_pooled_corpora():
    m = grid_model()
    a = sample_ensemble(m, 40, SimConfig(seed=1))
    b = sample_ensemble(m, 70, SimConfig(seed=2))
    stats = tally(a) + tally(b)
    assert np.array_equal(stats.counts, tally(a + b).counts)
    assert log_likelihood(m, stats) == pytest.approx(
        log_likelihood(m, tally(a)) + log_likelihood(m, tally(b)), rel=1e-13)


def test_one_child_makes_corpus_impossible():
    stats = tally([OrderedTree.from_parents([-1, 0])])
    assert log_likelihood(grid_model(), stats) == -math.inf
    with pytest.raises(NoFeasibleStartError):
        fit(stats, grid_model(), FitOptions(n_starts=3))


def test_profile_flags_infeasible_generations():
    trees = [OrderedTree.from_parents([-1, 0, 0, 1, 1, 2, 2])] * 3
    rows = profile_feasibility(grid_model(), tally(trees))
    assert [r.generation for r in rows] == [0, 1, 2]
    # generation 1: every vertex has exactly two children, variance 0 at mean 2
    assert rows[1].mean == 2.0 and rows[1].variance == 0.0
    assert rows[1].feasible


def test_fit_recovers_a_simple_model():
    truth = ModelSpec(Family.GEOMETRIC_ZERO, StructureSpec(K.EXP, (2.5, 0.6)),
                      StructureSpec(K.EXP, (3.0, 0.8)), {0: Family.POISSON_ZERO})
    stats = tally(sample_ensemble(truth, 20_000, SimConfig(seed=4)))
    result = fit(stats, truth, FitOptions(n_starts=6))
    assert result.converged
    np.testing.assert_allclose(result.model.theta, truth.theta, rtol=0.05)
    assert result.log_likelihood >= log_likelihood(truth, stats)
    doc = json.loads(result.to_json())
    assert doc["fit"]["converged"] is True
    assert ModelSpec.from_dict(doc) == result.model


def test_fit_is_deterministic():
    stats = tally(sample_ensemble(grid_model(), 500, SimConfig(seed=9)))
    a = fit(stats, grid_model(), FitOptions(n_starts=4, seed=1))
    b = fit(stats, grid_model(), FitOptions(n_starts=4, seed=1))
    assert a.to_json() == b.to_json()


def test_zero_offset_lands_on_the_boundary():
    truth = ModelSpec(Family.GEOMETRIC_ZERO,
                      StructureSpec(K.ANCHORED_EXP_CONST, (3.0, 1.5, 0.5, 0.0)),
                      StructureSpec(K.EXP, (3.0, 0.8)), {0: Family.POISSON_ZERO})
    stats = tally(sample_ensemble(truth, 5000, SimConfig(seed=12)))
    result = fit(stats, truth, FitOptions(n_starts=6))
    assert result.log_likelihood >= log_likelihood(truth, stats)
    assert result.model.mean.params[3] < 0.05


def test_hand_evaluated_likelihood():
    # Poisson-zero(p=0.5, lambda=1) everywhere: mean 1.5, variance 2.75
    m = ModelSpec(Family.POISSON_ZERO, StructureSpec(K.CONSTANT, (1.5,)),
                  StructureSpec(K.CONSTANT, (2.75,)))
    assert native_at(m, 0).p == pytest.approx(0.5) and native_at(m, 0).lam == pytest.approx(1.0)
    ll = log_likelihood(m, tally([OrderedTree.from_parents([-1, 0, 0])]))
    assert ll == pytest.approx(3 * math.log(0.5) - 1, rel=1e-12)
    assert ll == pytest.approx(-3.0794, abs=1e-4)
