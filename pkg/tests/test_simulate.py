import numpy as np
import pytest

from survreduce.estimators import kaplan_meier
from survreduce.simulate import (DEFAULTS, censoring_bound, simulate, true_survival,
                                 tve_effect)


def test_constant_hazard_mean():
    task = simulate("constant", 20_000, seed=1, censoring=0)
    assert task.time.mean() == pytest.approx(1.0, rel=0.03)
    assert task.status.all()


@pytest.mark.parametrize("scenario", ["constant", "breakpoint", "tve"])
def test_censoring_proportion(scenario):
    task = simulate(scenario, 4000, seed=2, censoring=0.3)
    assert 1 - task.status.mean() == pytest.approx(0.3, abs=0.03)


def test_censoring_bound_hits_target():
    rng = np.random.default_rng(3)
    T = rng.exponential(size=500)
    c = censoring_bound(T, 0.4)
    assert np.mean(np.minimum(T, c) / c) == pytest.approx(0.4, abs=1e-9)
    with pytest.raises(ValueError):
        censoring_bound(T, 1.2)


@pytest.mark.parametrize("scenario", ["breakpoint", "tve"])
def test_group_km_matches_true_survival(scenario):
    task = simulate(scenario, 8000, seed=4, censoring=0)
    grid = np.quantile(task.time, [0.1, 0.3, 0.5, 0.7])
    truth = true_survival(scenario, task.X, grid).mean(axis=0)
    km = kaplan_meier(task.time, task.status)(grid)
    np.testing.assert_allclose(km, truth, atol=0.02)


def test_tve_curves_cross():
    params = dict(ph=False, noise=0)
    task = simulate("tve", 10, seed=0, **params)
    X = np.array([[0.0], [1.0]])
    t = np.linspace(0.05, 6, 200)
    S = true_survival("tve", X, t, **params)
    diff = S[1] - S[0]
    assert diff.max() > 0.05 and diff.min() < -0.05
    assert task.feature_names == ["x1"]


def test_tve_effect_and_defaults():
    p = DEFAULTS["tve"]
    assert tve_effect(p["period"] / 4, p["amplitude"], p["period"]) == pytest.approx(p["amplitude"])
    assert tve_effect(0.0, 1, 1) == 0.0


def test_reproducible_and_validated():
    a = simulate("breakpoint", 50, seed=7)
    b = simulate("breakpoint", 50, seed=7)
    np.testing.assert_array_equal(a.time, b.time)
    np.testing.assert_array_equal(a.X, b.X)
    with pytest.raises(ValueError):
        simulate("weibull", 10)
    with pytest.raises(ValueError):
        simulate("constant", 10, shape=2)
