"""Synthetic single-event data with known hazards.

Event times are drawn exactly by inverting the cumulative hazard at a unit
exponential draw. Censoring is uniform on ``(0, c)`` with ``c`` chosen by
bisection so that the expected censoring proportion given the drawn event
times equals the target.

Scenarios (defaults in :data:`DEFAULTS`):

``constant``
    ``h(t) = rate``; two features without effect.
``breakpoint``
    ``h(t | x) = h0(t) exp(x b)`` with ``h0 = h1`` before ``b`` and ``h2`` after.
``tve``
    ``h(t | x) = base * exp(f(t) x1 + x_ph b)`` with
    ``f(t) = amplitude * sin(2 pi t / period)`` and binary ``x1``. The negative
    default amplitude protects ``x1 = 1`` early and raises its hazard later,
    so the group survival curves cross.
"""
from __future__ import annotations

import numpy as np

from .data import SurvivalTask, SINGLE

SCENARIOS = ("constant", "breakpoint", "tve")

DEFAULTS = {
    "constant": {"rate": 1.0},
    "breakpoint": {"h1": 0.1, "h2": 0.6, "b": 2.0, "beta": (0.8, 0.5, -0.6)},
    "tve": {"base": 0.4, "amplitude": -2.0, "period": 3.0, "beta": (0.5, -0.5),
            "ph": True, "noise": 2},
}


def _params(scenario, overrides):
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    p = dict(DEFAULTS[scenario])
    unknown = set(overrides) - set(p)
    if unknown:
        raise ValueError(f"unknown {scenario} parameters: {sorted(unknown)}")
    p.update(overrides)
    return p


def tve_effect(t, amplitude, period):
    """``f(t)``, the time-varying log hazard ratio of ``x1``."""
    return amplitude * np.sin(2.0 * np.pi * np.asarray(t, dtype=float) / period)


def _invert_tve(target, amplitude, period, steps=4096):
    """Solve ``int_0^t exp(f(u)) du = target`` using periodicity of ``f``."""
    u = np.linspace(0.0, period, steps + 1)
    g = np.exp(tve_effect(u, amplitude, period))
    I = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(u))])
    full = I[-1]
    k = np.floor(target / full)
    rest = target - k * full
    return k * period + np.interp(rest, I, u)


def censoring_bound(times, rate, tol=1e-12):
    """``c`` such that ``mean(min(T, c) / c) == rate`` for ``C ~ U(0, c)``."""
    if not 0 < rate < 1:
        raise ValueError("censoring rate must lie in (0, 1)")
    times = np.asarray(times, dtype=float)

    def prop(c):
        return np.mean(np.minimum(times, c) / c)

    lo, hi = times.min() * 1e-6, times.max()
    while prop(hi) > rate:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if prop(mid) > rate:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return 0.5 * (lo + hi)


def simulate(scenario, n, seed=0, censoring=0.3, **params):
    """Draw a :class:`SurvivalTask` with ``n`` subjects.

    ``censoring`` is the target censoring proportion (0 for none).
    """
    p = _params(scenario, params)
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= censoring < 1:
        raise ValueError("censoring must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    E = rng.exponential(size=n)
    if scenario == "constant":
        X = rng.normal(size=(n, 2))
        names = ["x1", "x2"]
        T = E / p["rate"]
    elif scenario == "breakpoint":
        beta = np.asarray(p["beta"], dtype=float)
        X = np.column_stack([rng.binomial(1, 0.5, n), rng.normal(size=n),
                             rng.uniform(size=n)])[:, :len(beta)]
        names = [f"x{k + 1}" for k in range(X.shape[1])]
        target = E * np.exp(-X @ beta)
        h1, h2, b = p["h1"], p["h2"], p["b"]
        T = np.where(target < h1 * b, target / h1, b + (target - h1 * b) / h2)
    else:
        x1 = rng.binomial(1, 0.5, n).astype(float)
        cols, names = [x1], ["x1"]
        lin = np.zeros(n)
        if p["ph"]:
            beta = np.asarray(p["beta"], dtype=float)
            Z = rng.normal(size=(n, len(beta)))
            lin = Z @ beta
            cols += list(Z.T)
            names += [f"z{k + 1}" for k in range(len(beta))]
        for k in range(int(p["noise"])):
            cols.append(rng.normal(size=n))
            names.append(f"noise{k + 1}")
        X = np.column_stack(cols)
        target = E * np.exp(-lin) / p["base"]
        T = np.where(x1 == 1, _invert_tve(target, p["amplitude"], p["period"]), target)
    if censoring > 0:
        C = rng.uniform(0.0, censoring_bound(T, censoring), size=n)
        time = np.minimum(T, C)
        status = (T <= C).astype(int)
    else:
        time, status = T, np.ones(n, int)
    return SurvivalTask.from_arrays(time, status, X, feature_names=names, kind=SINGLE)


def true_survival(scenario, X, times, **params):
    """Exact ``S(t | x)`` for rows of ``X`` (as produced by :func:`simulate`)."""
    p = _params(scenario, params)
    X = np.asarray(X, dtype=float)
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if scenario == "constant":
        return np.exp(-p["rate"] * np.broadcast_to(t, (len(X), len(t))))
    if scenario == "breakpoint":
        h1, h2, b = p["h1"], p["h2"], p["b"]
        H0 = np.where(t < b, h1 * t, h1 * b + h2 * (t - b))
        beta = np.asarray(p["beta"], dtype=float)
        return np.exp(-np.exp(X[:, :len(beta)] @ beta)[:, None] * H0[None, :])
    lin = X[:, 1:1 + len(p["beta"])] @ np.asarray(p["beta"]) if p["ph"] else np.zeros(len(X))
    u = np.linspace(0.0, p["period"], 4097)
    g = np.exp(tve_effect(u, p["amplitude"], p["period"]))
    I = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(u))])
    k = np.floor(t / p["period"])
    It = k * I[-1] + np.interp(t - k * p["period"], u, I)
    H = np.where(X[:, :1] == 1, It[None, :], t[None, :]) * p["base"] * np.exp(lin)[:, None]
    return np.exp(-H)
