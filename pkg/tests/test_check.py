import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import poisson

from igwt import (
    OrderedTree,
    SimConfig,
    check,
    ecdf_with_band,
    empirical_generation_moments,
    grid_model,
    sample_ensemble,
)
from igwt.check import sample_summary
from igwt.structures import eval_structure


def test_constant_sample_ecdf():
    e = ecdf_with_band([5, 5, 5])
    assert list(e.x) == [5.0] and list(e.cdf) == [1.0]
    assert e(4.9) == 0.0 and e(5) == 1.0
    assert e.lower[0] == e.upper[0] == 1.0


def test_ecdf_errors():
    with pytest.raises(ValueError):
        ecdf_with_band([])
    with pytest.raises(ValueError):
        ecdf_with_band([1.0], level=1.0)


@given(st.lists(st.integers(-50, 50), min_size=1, max_size=200))
def test_ecdf_shape(values):
    e = ecdf_with_band(values)
    assert np.all(np.diff(e.cdf) > 0) and e.cdf[-1] == 1.0
    assert np.all(e.lower <= e.cdf) and np.all(e.cdf <= e.upper)
    assert np.all(e.lower >= 0) and np.all(e.upper <= 1)
    # right-continuous: value at a jump equals the post-jump level
    assert np.array_equal(e(e.x), e.cdf)
    assert ecdf_with_band(values).to_csv() == e.to_csv()


def test_band_coverage_of_a_known_cdf():
    rng = np.random.default_rng(0)
    e = ecdf_with_band(rng.poisson(6.0, 5000))
    grid = e.x[(e.cdf > 0.01) & (e.cdf < 0.99)]
    truth = poisson.cdf(grid, 6.0)
    covered = np.mean((e.lower[np.isin(e.x, grid)] <= truth) & (truth <= e.upper[np.isin(e.x, grid)]))
    assert covered >= 0.8


def test_equal_offspring_gives_zero_width_intervals():
    trees = [OrderedTree.from_parents([-1, 0, 0])] * 4
    gm = empirical_generation_moments(trees, 0)
    assert gm.variance == 0 and gm.ci_mean == (2.0, 2.0) and gm.ci_variance == (0.0, 0.0)


def test_missing_or_single_observation():
    trees = [OrderedTree.single()]
    with pytest.raises(ValueError, match="single"):
        empirical_generation_moments(trees, 0)
    with pytest.raises(ValueError, match="no observations"):
        empirical_generation_moments(trees, 3)


def test_offspring_intervals_are_calibrated():
    m = grid_model()
    trees = sample_ensemble(m, 5000, SimConfig(seed=21))
    hits = total = 0
    for n in range(0, 8):
        gm = empirical_generation_moments(trees, n, seed=n)
        mu, s2 = eval_structure(m.mean, n), eval_structure(m.variance, n)
        hits += (gm.ci_mean[0] <= mu <= gm.ci_mean[1]) + (gm.ci_variance[0] <= s2 <= gm.ci_variance[1])
        total += 2
    assert hits / total >= 0.9 - 1e-12 or hits >= total - 2


def test_sample_summary_errors_scale():
    mean, var, se_mean, se_var = sample_summary(np.arange(10_000) % 7)
    assert mean == pytest.approx(3.0, rel=1e-3)
    assert se_mean == pytest.approx(np.sqrt(var / 10_000))
    assert se_var > 0


@pytest.fixture(scope="module")
def report():
    data = sample_ensemble(grid_model(), 400, SimConfig(seed=100))
    return check(grid_model(), data, replicates=3000, seed=7)


def test_report_columns_agree(report):
    for row in report.table:
        for i in range(2):
            assert abs(row.simulation[i] - row.analytical[i]) < 3.5 * row.simulation_se[i]


def test_report_serialisation(report, tmp_path):
    doc = json.loads(report.to_json())
    assert [r["statistic"] for r in doc["table"]] == ["Z", "N_max", "leaves"]
    files = report.csv_files()
    assert {"table.csv", "generation_sizes.csv", "offspring.csv",
            "ecdf_height_model.csv", "ecdf_total_vertices_data.csv"} <= set(files)


def test_report_is_deterministic():
    data = sample_ensemble(grid_model(), 50, SimConfig(seed=1))
    a = check(grid_model(), data, replicates=200, seed=3)
    b = check(grid_model(), data, replicates=200, seed=3)
    assert a.to_json() == b.to_json() and a.csv_files() == b.csv_files()


def test_empty_data_rejected():
    with pytest.raises(ValueError):
        check(grid_model(), [], replicates=10)
