"""Kaplan-Meier, censoring Kaplan-Meier, Nelson-Aalen and Aalen-Johansen."""
from __future__ import annotations

import csv

import numpy as np

from .data import COMPETING, MULTISTATE, DataError, fmt_float, windows


class StepFunction:
    """Right-continuous step function on ``[0, inf)``.

    ``values[k]`` holds on ``[knots[k], knots[k + 1])``, ``left_value`` before
    the first knot and the last value is carried forward past the last one.
    """

    def __init__(self, knots, values, left_value=1.0, name="", convention=""):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.shape != values.shape or knots.ndim != 1:
            raise ValueError("knots and values must be 1-d arrays of equal length")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        self.knots, self.values = knots, values
        self.left_value = float(left_value)
        self.name, self.convention = name, convention

    def _lookup(self, idx):
        full = np.concatenate([[self.left_value], self.values])
        return full[idx + 1]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self._lookup(np.searchsorted(self.knots, t, side="right") - 1)

    def left_limit(self, t):
        """Value just before ``t``."""
        t = np.asarray(t, dtype=float)
        return self._lookup(np.searchsorted(self.knots, t, side="left") - 1)

    def integral(self, tau):
        """Exact integral over ``[0, tau]``."""
        tau = float(tau)
        edges = np.concatenate([[0.0], self.knots[self.knots < tau], [tau]])
        heights = np.concatenate([[self.left_value], self.values])[: len(edges) - 1]
        return float(np.sum(heights * np.diff(edges)))

    def __repr__(self):
        return f"StepFunction({self.name or 'anonymous'}, {len(self.knots)} knots)"

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# estimator={self.name or 'step'}; ties={self.convention or 'n/a'}; "
                     f"left_value={fmt_float(self.left_value)}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["knot", "value"])
            for k, v in zip(self.knots, self.values):
                w.writerow([fmt_float(k), fmt_float(v)])

    def to_dict(self):
        return {"knots": self.knots.tolist(), "values": self.values.tolist(),
                "left_value": self.left_value, "name": self.name, "convention": self.convention}

    @classmethod
    def from_dict(cls, d):
        return cls(d["knots"], d["values"], d["left_value"], d.get("name", ""),
                   d.get("convention", ""))


class PiecewiseExponential:
    """Survival curve of a piecewise-constant hazard on a cut grid.

    Between cuts the survival decays exponentially; past the last cut the
    last hazard is carried forward.
    """

    def __init__(self, cuts, hazards):
        self.cuts = np.asarray(cuts, dtype=float)
        self.hazards = np.asarray(hazards, dtype=float)
        self.edges = np.concatenate([[0.0], self.cuts])
        self._H = np.concatenate([[0.0], np.cumsum(self.hazards * np.diff(self.edges))])

    @property
    def knots(self):
        return self.cuts

    @property
    def values(self):
        return np.exp(-self._H[1:])

    def cumhaz(self, t):
        t = np.asarray(t, dtype=float)
        j = np.clip(np.searchsorted(self.cuts, t, side="left"), 0, len(self.cuts) - 1)
        return self._H[j] + self.hazards[j] * (t - self.edges[j])

    def __call__(self, t):
        return np.exp(-self.cumhaz(t))

    def integral(self, tau):
        tau = float(tau)
        total = 0.0
        J = len(self.cuts)
        for j in range(J):
            lo = self.edges[j]
            if lo >= tau:
                break
            hi = self.cuts[j] if j < J - 1 else max(self.cuts[j], tau)
            width = min(hi, tau) - lo
            h = self.hazards[j]
            s0 = np.exp(-self._H[j])
            total += s0 * width if h == 0 else s0 * -np.expm1(-h * width) / h
        return float(total)


def _as_arrays(times, status, entry=None):
    t = np.asarray(times, dtype=float)
    d = np.asarray(status, dtype=np.int64)
    if t.ndim != 1 or len(t) == 0:
        raise ValueError("estimators need a non-empty 1-d time vector")
    if len(d) != len(t):
        raise ValueError("times and status differ in length")
    e = np.zeros(len(t)) if entry is None else np.asarray(entry, dtype=float)
    return t, d, e


def risk_table(times, status, entry=None):
    """Sorted unique observed times with risk-set sizes and event counts.

    The risk set at ``u`` is ``{i : entry_i < u <= t_i}``, so a subject
    censored at ``u`` still counts for events at ``u``.
    """
    t, d, e = _as_arrays(times, status, entry)
    u = np.unique(t)
    n_risk = (len(t) - np.searchsorted(np.sort(t), u, side="left")
              - (len(e) - np.searchsorted(np.sort(e), u, side="left")))
    events = np.bincount(np.searchsorted(u, t[d == 1]), minlength=len(u))
    return u, n_risk.astype(float), events.astype(float)


def kaplan_meier(times, status, entry=None):
    """Product-limit survival estimate; events precede censorings at ties."""
    u, n, d = risk_table(times, status, entry)
    keep = d > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(n[keep] > 0, 1.0 - d[keep] / n[keep], 1.0)
    return StepFunction(u[keep], np.cumprod(factor), 1.0, "kaplan-meier",
                        "events before censorings")


def censoring_km(times, status):
    """Kaplan-Meier of the censoring distribution (status flipped).

    With the flip, censorings at a tied time are processed before the
    events there, so subjects failing at ``u`` stay in the censoring risk
    set at ``u``.
    """
    t, d, _ = _as_arrays(times, status)
    g = kaplan_meier(t, 1 - d)
    g.name, g.convention = "censoring-kaplan-meier", "censorings before events"
    return g


def nelson_aalen(times, status, entry=None):
    """Cumulative hazard ``sum d_j / n_j`` over event times."""
    u, n, d = risk_table(times, status, entry)
    keep = d > 0
    return StepFunction(u[keep], np.cumsum(d[keep] / n[keep]), 0.0, "nelson-aalen",
                        "events before censorings")


class TransitionMatrixPath:
    """Aalen-Johansen path: ``matrices[k] = P(0, knots[k])``; identity before."""

    def __init__(self, states, knots, matrices):
        self.states = tuple(states)
        self.knots = np.asarray(knots, dtype=float)
        s = len(self.states)
        self.matrices = np.asarray(matrices, dtype=float).reshape(len(self.knots), s, s)

    def index(self, state):
        return self.states.index(str(state))

    def __call__(self, tau):
        k = int(np.searchsorted(self.knots, float(tau), side="right")) - 1
        return np.eye(len(self.states)) if k < 0 else self.matrices[k].copy()

    def prob(self, from_state, to_state):
        a, b = self.index(from_state), self.index(to_state)
        left = 1.0 if a == b else 0.0
        return StepFunction(self.knots, self.matrices[:, a, b], left, f"aalen-johansen {a}->{b}")

    def cif(self, cause):
        """CIF of ``cause`` for a competing-risks path (initial state first)."""
        return self.prob(self.states[0], cause)


def _ms_windows(task):
    """(entry, exit, from index, to index, status, states) from any task kind."""
    if task.kind == MULTISTATE:
        states = task.states
        reps = windows(task)
        rows = np.array([r for r, _ in reps], dtype=np.int64)
        status = np.array([s for _, s in reps], dtype=np.int64)
        idx = {s: k for k, s in enumerate(states)}
        fr = np.array([idx[task.from_state[r]] for r in rows], dtype=np.int64)
        to = np.array([idx[task.to_state[r]] for r in rows], dtype=np.int64)
        return task.entry[rows], task.time[rows], fr, to, status, states
    if task.kind == COMPETING:
        states = ("0",) + tuple(task.cause_labels)
        to = np.asarray(task.cause, dtype=np.int64)
    else:
        states = ("0", "1")
        to = np.where(task.status == 1, 1, 0).astype(np.int64)
    n = len(task)
    return task.entry, task.time, np.zeros(n, np.int64), to, task.status, states


def aalen_johansen_arrays(entry, exit, from_idx, to_idx, status, n_states):
    """Event times and ``P(0, u)`` matrices from window data."""
    entry, exit = np.asarray(entry, float), np.asarray(exit, float)
    from_idx, to_idx = np.asarray(from_idx, np.int64), np.asarray(to_idx, np.int64)
    status = np.asarray(status, np.int64)
    ev = status == 1
    u = np.unique(exit[ev])
    sorted_exit, sorted_entry = {}, {}
    for o in range(n_states):
        m = from_idx == o
        sorted_exit[o], sorted_entry[o] = np.sort(exit[m]), np.sort(entry[m])
    P = np.eye(n_states)
    out = np.empty((len(u), n_states, n_states))
    pos = np.searchsorted(u, exit[ev])
    counts = np.zeros((len(u), n_states, n_states))
    np.add.at(counts, (pos, from_idx[ev], to_idx[ev]), 1.0)
    for k, t in enumerate(u):
        dH = np.zeros((n_states, n_states))
        for o in range(n_states):
            c = counts[k, o]
            if not c.any():
                continue
            at_risk = ((len(sorted_exit[o]) - np.searchsorted(sorted_exit[o], t, side="left"))
                       - (len(sorted_entry[o]) - np.searchsorted(sorted_entry[o], t, side="left")))
            if at_risk <= 0:
                raise DataError(f"transition out of state index {o} at time {t!r} "
                                "with nobody at risk")
            dH[o] = c / at_risk
            dH[o, o] = -c.sum() / at_risk
        P = P @ (np.eye(n_states) + dH)
        out[k] = P
    return u, out


def aalen_johansen(task):
    """Empirical transition matrix ``P(0, tau) = prod (I + dH(u))``.

    Single-event tasks become the two-state model ``0 -> 1``; competing
    risks use states ``0`` and the cause labels, so ``P[0, k]`` is the CIF
    of cause ``k``.
    """
    entry, exit, fr, to, status, states = _ms_windows(task)
    u, mats = aalen_johansen_arrays(entry, exit, fr, to, status, len(states))
    return TransitionMatrixPath(states, u, mats)
