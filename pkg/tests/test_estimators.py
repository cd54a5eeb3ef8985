import numpy as np
import pytest
from scipy import integrate

from survreduce.data import SurvivalTask
from survreduce.estimators import (PiecewiseExponential, StepFunction, aalen_johansen,
                                   censoring_km, kaplan_meier, nelson_aalen, risk_table)

from conftest import illness_death, random_competing, random_single


def km_loop(t, d, grid):
    """Textbook product-limit estimate evaluated at ``grid``."""
    out = []
    for g in grid:
        s = 1.0
        for u in np.unique(t[(d == 1) & (t <= g)]):
            s *= 1 - np.sum((t == u) & (d == 1)) / np.sum(t >= u)
        out.append(s)
    return np.array(out)


def test_km_table2(tumor3):
    km = kaplan_meier(tumor3.time, tumor3.status)
    np.testing.assert_allclose(km([0.4, 1.3, 2.0, 2.1, 5]), [1, 0.5, 0.5, 0, 0])


def test_km_matches_loop():
    rng = np.random.default_rng(1)
    for _ in range(30):
        t, d = random_single(rng)
        grid = np.concatenate([t, t - 1e-9, [0, 10]])
        np.testing.assert_allclose(kaplan_meier(t, d)(grid), km_loop(t, d, grid), atol=1e-14)


def test_km_events_before_censorings():
    # censoring at the same time as the event stays in the risk set
    km = kaplan_meier([1.0, 1.0, 2.0], [1, 0, 0])
    assert km(1.0) == pytest.approx(2 / 3)


def test_censoring_km_is_flipped_km():
    t = np.array([1.0, 1.0, 2.0, 3.0])
    d = np.array([1, 0, 0, 1])
    G = censoring_km(t, d)
    np.testing.assert_allclose(G([1.0, 2.0, 3.0]), km_loop(t, 1 - d, [1.0, 2.0, 3.0]))
    assert G(1.0) == pytest.approx(3 / 4)


def test_nelson_aalen_matches_loop():
    rng = np.random.default_rng(2)
    t, d = random_single(rng, 40)
    na = nelson_aalen(t, d)
    for g in (0.1, 0.5, 1.0, 3.0):
        ref = sum(np.sum((t == u) & (d == 1)) / np.sum(t >= u)
                  for u in np.unique(t[(d == 1) & (t <= g)]))
        assert na(g) == pytest.approx(ref, abs=1e-14)


def test_left_truncated_risk_table():
    u, n, ev = risk_table([2.0, 3.0, 4.0], [1, 1, 1], entry=[0.0, 2.5, 0.0])
    np.testing.assert_array_equal(u, [2, 3, 4])
    np.testing.assert_array_equal(n, [2, 2, 1])
    np.testing.assert_array_equal(ev, [1, 1, 1])


def test_step_function_integral_and_left_limit():
    f = StepFunction([1.0, 2.0], [0.5, 0.25])
    assert f.integral(3.0) == pytest.approx(1 + 0.5 + 0.25)
    assert f.integral(0.5) == pytest.approx(0.5)
    assert f.left_limit(1.0) == 1.0 and f(1.0) == 0.5
    g = StepFunction.from_dict(f.to_dict())
    np.testing.assert_array_equal(g([0, 1, 1.5, 9]), f([0, 1, 1.5, 9]))


def test_step_function_csv(tmp_path):
    p = tmp_path / "km.csv"
    kaplan_meier([1.0, 2.0], [1, 1]).to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# estimator=kaplan-meier")
    assert lines[1:] == ["knot,value", "1,0.5", "2,0"]


def test_piecewise_exponential_matches_quadrature():
    pe = PiecewiseExponential([1.0, 2.5, 4.0], [0.3, 0.0, 1.2])
    hazard = lambda s: 0.3 if s <= 1 else (0.0 if s <= 2.5 else 1.2)
    for t in (0.5, 1.0, 2.0, 3.7, 6.0):
        H, _ = integrate.quad(hazard, 0, t, points=[1.0, 2.5, 4.0], limit=200)
        assert pe(t) == pytest.approx(np.exp(-H), rel=1e-12)
    for tau in (0.7, 3.0, 5.5):
        ref, _ = integrate.quad(pe, 0, tau, points=[1.0, 2.5, 4.0], limit=200)
        assert pe.integral(tau) == pytest.approx(ref, rel=1e-9)


def test_aalen_johansen_single_event_is_km():
    rng = np.random.default_rng(3)
    t, d = random_single(rng, 30)
    aj = aalen_johansen(SurvivalTask.from_arrays(t, d))
    grid = np.linspace(0, t.max(), 40)
    np.testing.assert_allclose(aj.prob("0", "0")(grid), kaplan_meier(t, d)(grid), atol=1e-14)


def test_aalen_johansen_competing_cif_formula():
    rng = np.random.default_rng(4)
    for _ in range(10):
        task = random_competing(rng, 40)
        aj = aalen_johansen(task)
        km = kaplan_meier(task.time, task.status)
        for k, lab in enumerate(task.cause_labels, start=1):
            grid = np.sort(np.unique(task.time))
            ref = []
            for g in grid:
                total = 0.0
                for u in np.unique(task.time[(task.cause == k) & (task.time <= g)]):
                    dk = np.sum((task.time == u) & (task.cause == k))
                    total += km.left_limit(u) * dk / np.sum(task.time >= u)
                ref.append(total)
            np.testing.assert_allclose(aj.cif(lab)(grid), ref, atol=1e-13)
        P = aj(task.time.max())
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-13)


def test_aalen_johansen_multistate_rows_sum_to_one():
    task = illness_death(np.random.default_rng(5), 80)
    aj = aalen_johansen(task)
    assert aj.states == ("0", "1", "2")
    for tau in (0.5, 1.0, 2.0, 5.0):
        P = aj(tau)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        assert P[2, 2] == 1.0 and np.all(P >= -1e-12)
    np.testing.assert_array_equal(aj(0.0), np.eye(3))
