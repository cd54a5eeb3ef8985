import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from survreduce.estimators import StepFunction, censoring_km, kaplan_meier
from survreduce.metrics import (brier_curve, default_tau_max, harrell_c, isbs,
                                type1_quantile)

from conftest import random_single


def c_by_pairs(risk, t, d):
    conc = comp = 0.0
    for i in range(len(t)):
        for j in range(len(t)):
            if d[i] == 1 and t[i] < t[j]:
                comp += 1
                conc += 1.0 if risk[i] > risk[j] else 0.5 if risk[i] == risk[j] else 0.0
    return 0.5 if comp == 0 else conc / comp


def isbs_by_loops(S_of, t, d, G, tau):
    """Direct transcription: S_of(i, u) is subject i's survival at u."""
    grid = sorted({0.0, tau} | {u for u in t if u <= tau} | set(S_of.knots[S_of.knots <= tau]))
    scores = []
    for u in grid:
        total, kept = 0.0, 0
        for i in range(len(t)):
            s = S_of(i, u)
            if t[i] <= u and d[i] == 1:
                g = G.left_limit(t[i])
                if g <= 0:
                    continue
                total += s ** 2 / g
            elif t[i] > u:
                g = G(u)
                if g <= 0:
                    continue
                total += (1 - s) ** 2 / g
            kept += 1
        scores.append(total / kept if kept else 0.0)
    area = sum(0.5 * (scores[k] + scores[k + 1]) * (grid[k + 1] - grid[k])
               for k in range(len(grid) - 1))
    return area / tau


class Curves:
    """Per-subject exponential curves with a shared knot set."""

    def __init__(self, rates, knots):
        self.rates = np.asarray(rates, float)
        self.knots = np.asarray(knots, float)

    def __call__(self, i, u):
        return float(np.exp(-self.rates[i] * u))

    def evaluate(self, grid):
        return np.exp(-self.rates[:, None] * np.asarray(grid)[None, :])


def test_harrell_c_matches_pair_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(50):
        t, d = random_single(rng, digits=1)
        risk = np.round(rng.normal(size=len(t)), 1)
        assert harrell_c(risk, t, d) == pytest.approx(c_by_pairs(risk, t, d), abs=1e-14)


def test_harrell_c_trivial_cases():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    d = np.array([1, 1, 1, 0])
    assert harrell_c(-t, t, d) == 1.0
    assert harrell_c(t, t, d) == 0.0
    assert harrell_c(np.zeros(4), t, d) == 0.5
    assert harrell_c([1.0, 2.0], [1.0, 1.0], [1, 1]) == 0.5
    assert harrell_c([1.0, 2.0], [1.0, 2.0], [0, 0]) == 0.5
    with pytest.raises(ValueError):
        harrell_c([1.0], t, d)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_harrell_c_antisymmetry_and_monotone_invariance(seed):
    rng = np.random.default_rng(seed)
    t, d = random_single(rng)
    risk = rng.normal(size=len(t))
    c = harrell_c(risk, t, d)
    assert harrell_c(-risk, t, d) == pytest.approx(1 - c, abs=1e-14)
    assert harrell_c(np.exp(3 * risk) + 7, t, d) == c


def test_type1_quantile():
    assert type1_quantile([4, 1, 3, 2, 5], 0.8) == 4
    assert type1_quantile([1, 2, 3], 0.0) == 1
    assert type1_quantile([1, 2, 3], 1.0) == 3
    assert default_tau_max(np.arange(1.0, 11.0)) == 8.0


def test_isbs_matches_loops():
    rng = np.random.default_rng(1)
    for _ in range(20):
        t, d = random_single(rng, 30)
        G = censoring_km(*random_single(rng, 40))
        curves = Curves(rng.uniform(0.3, 3.0, len(t)), rng.uniform(0, 2, 5))
        tau = float(np.quantile(t, 0.8))
        assert isbs(curves, t, d, G, tau) == pytest.approx(isbs_by_loops(curves, t, d, G, tau),
                                                            abs=1e-12)


def test_isbs_trivial_values():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    d = np.ones(4, int)
    G = StepFunction([], [], 1.0)
    half = lambda grid: np.full(len(grid), 0.5)
    assert isbs(half, t, d, G, 3.0) == pytest.approx(0.25)
    perfect = [StepFunction([u], [0.0]) for u in t]
    assert isbs(perfect, t, d, G, 3.0) == 0.0


def test_isbs_drops_zero_weight_terms():
    # training censoring survival hits 0 at 1.5
    t = np.array([1.0, 2.0, 3.0])
    d = np.array([1, 0, 1])
    G = StepFunction([1.5], [0.0])
    bc = brier_curve(lambda g: np.full(len(g), 0.5), t, d, G, 3.0)
    # subject 3 drops out at 2 (alive, G = 0) and at 3 (event, G(3-) = 0); the
    # censored subject 2 still counts in the denominator with a zero term
    assert bc.dropped == 2
    np.testing.assert_allclose(bc.scores, [0.25, 0.25, 0.125, 0.125])


def test_isbs_known_km_value():
    # no censoring: KM is the empirical survival; the Brier score at u is F(u) S(u)
    t = np.array([1.0, 2.0, 3.0, 4.0])
    d = np.ones(4, int)
    km = kaplan_meier(t, d)
    G = StepFunction([], [], 1.0)
    bc = brier_curve(km, t, d, G, 4.0)
    S = km(bc.grid)
    np.testing.assert_allclose(bc.scores, S * (1 - S))
