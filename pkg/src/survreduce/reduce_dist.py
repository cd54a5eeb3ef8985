"""Piecewise-exponential (PEM) and discrete-time (DT) reductions.

Both expand the task to long format on a cut grid, fit one learner on the
rows (Poisson with log-exposure offset for PEM, binary for DT) and map the
per-interval hazards back to survival curves, cumulative incidences and
transition matrices.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import COMPETING, MULTISTATE, SINGLE, CATEGORICAL, Feature, fmt_float
from .estimators import PiecewiseExponential, StepFunction
from .learners import DesignSpec, FormulaSpec, Frame, LearnerSpec, fit_learner, load_learner
from .partition import CutGrid, expand, make_cuts

PEM = "pem"
DT = "dt"
FORMAT = "survreduce-model"
VERSION = 1
_HAZARD_CAP = 1.0 - 1e-12


class ReductionWarning(UserWarning):
    pass


def default_formula(kind):
    """Features plus the interval end time, plus cause/transition labels."""
    extra = {COMPETING: " + cause", MULTISTATE: " + transition"}.get(kind, "")
    return ". + a_end" + extra


def subject_holdout(ids, fraction, seed):
    """Boolean mask of rows whose subject falls in a random holdout."""
    ids = np.asarray(ids, dtype=object)
    subjects = list(dict.fromkeys(ids.tolist()))
    rng = np.random.default_rng(seed)
    k = max(1, int(round(fraction * len(subjects))))
    if k >= len(subjects):
        raise ValueError("holdout would contain every subject")
    chosen = set(rng.permutation(len(subjects))[:k].tolist())
    held = {s for i, s in enumerate(subjects) if i in chosen}
    return np.array([s in held for s in ids.tolist()], dtype=bool)


def dt_risk_rows(long, censoring="previous"):
    """Rows entering the DT likelihood.

    ``previous`` drops the interval in which a subject is censored unless the
    censoring falls exactly on the cut closing it, so censorings count as
    happening just after the events of the previous cut (as in Kaplan-Meier).
    ``interval`` keeps every row, i.e. a subject censored inside interval
    ``j`` still counts as at risk for all of ``j``.
    """
    if censoring == "interval":
        return np.ones(len(long), dtype=bool)
    if censoring != "previous":
        raise ValueError(f"unknown censoring rule {censoring!r}")
    return ~(long.censored & (long.exit < long.tend))


# back-mapping ---------------------------------------------------------------

def pem_curves(hazards, cuts):
    """Survival and CIFs at the cuts from cause-specific hazards.

    ``hazards`` has shape ``(n, J, q)``. Returns ``S (n, J)`` and
    ``CIF (n, J, q)``; the CIF increment over interval ``l`` is
    ``h_k / h * (S(a_{l-1}) - S(a_l))``.
    """
    hazards = np.asarray(hazards, dtype=float)
    width = np.diff(np.concatenate([[0.0], cuts]))
    total = hazards.sum(axis=2)
    H = np.cumsum(total * width, axis=1)
    S = np.exp(-H)
    S_prev = np.concatenate([np.ones((len(S), 1)), S[:, :-1]], axis=1)
    drop = S_prev - S
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(total[:, :, None] > 0, hazards / np.where(total > 0, total, 1.0)[:, :, None],
                         0.0)
    cif = np.cumsum(share * drop[:, :, None], axis=1)
    return S, cif


def dt_curves(hazards):
    """Survival and CIFs from discrete hazards ``(n, J, q)``.

    The all-cause hazard is capped at ``1 - 1e-12``; when the cause-specific
    hazards sum past the cap they are scaled down proportionally. Returns
    ``S``, ``CIF`` and the number of capped cells.
    """
    hazards = np.asarray(hazards, dtype=float)
    total = hazards.sum(axis=2)
    over = total > _HAZARD_CAP
    if over.any():
        scale = np.where(over, _HAZARD_CAP / np.where(over, total, 1.0), 1.0)
        hazards = hazards * scale[:, :, None]
        total = np.minimum(total, _HAZARD_CAP)
    S = np.cumprod(1.0 - total, axis=1)
    S_prev = np.concatenate([np.ones((len(S), 1)), S[:, :-1]], axis=1)
    cif = np.cumsum(hazards * S_prev[:, :, None], axis=1)
    return S, cif, int(over.sum())


def _generator(rates, edges, n_states):
    G = np.zeros((n_states, n_states))
    for (a, b), r in zip(edges, rates):
        G[a, b] += r
    G[np.diag_indices(n_states)] = -G.sum(axis=1)
    return G


def pem_transition_path(hazards, edges, n_states, cuts, s=0.0, tau=None):
    """``P(s, tau)`` as a product of ``I + dH`` over the grid intervals.

    ``hazards`` is ``(J, E)`` for the ``E`` edges ``(from, to)`` given as state
    indices. A factor whose diagonal would turn negative is split into
    ``2^m`` equal sub-steps until it does not.
    """
    cuts = np.asarray(cuts, dtype=float)
    tau = cuts[-1] if tau is None else float(tau)
    lo_edges = np.concatenate([[0.0], cuts[:-1]])
    P = np.eye(n_states)
    for j in range(len(cuts)):
        lo, hi = max(lo_edges[j], s), min(cuts[j], tau)
        if j == len(cuts) - 1:
            hi = tau
        if hi <= lo:
            continue
        dH = _generator(hazards[j], edges, n_states) * (hi - lo)
        m = 0
        while np.any(1.0 + np.diag(dH) / 2 ** m < 0):
            m += 1
        M = np.eye(n_states) + dH / 2 ** m
        P = P @ np.linalg.matrix_power(M, 2 ** m)
    return P


def dt_transition_path(hazards, edges, n_states, j_s=1, j_tau=None):
    """``prod_{j=j_s}^{j_tau} M_j`` with ``M_j = I + off-diagonal hazards``.

    Rows whose off-diagonal hazards sum past 1 are scaled down to sum to 1.
    Returns the matrix and the number of clipped rows.
    """
    J = len(hazards)
    j_tau = J if j_tau is None else j_tau
    P = np.eye(n_states)
    clipped = 0
    for j in range(j_s - 1, j_tau):
        G = _generator(hazards[j], edges, n_states)
        off = G - np.diag(np.diag(G))
        rows = off.sum(axis=1)
        bad = rows > 1.0
        if bad.any():
            clipped += int(bad.sum())
            off[bad] /= rows[bad, None]
        M = off + np.diag(1.0 - off.sum(axis=1))
        P = P @ M
    return P, clipped


# curve sets -----------------------------------------------------------------

@dataclass(eq=False)
class SurvivalCurveSet:
    """Per-subject predictions on a cut grid.

    ``survival[i, j]`` is the survival at ``cuts[j]``; ``interp`` tells how to
    fill in between cuts (``exp`` for PEM, ``step`` for DT and
    non-parametric curves). ``cif`` is ``(n, J, q)`` for competing risks,
    ``transition`` is ``(n, J, s, s)`` with ``P(0, cuts[j])`` for multi-state
    fits.
    """

    ids: np.ndarray
    cuts: np.ndarray
    survival: np.ndarray
    interp: str = "step"
    hazards: np.ndarray | None = None
    cif: np.ndarray | None = None
    cause_labels: tuple = ()
    transition: np.ndarray | None = None
    states: tuple = ()
    clipped: int = 0
    cause_hazards: np.ndarray | None = None

    def __len__(self):
        return len(self.survival)

    def curve(self, i):
        if self.interp == "exp":
            return PiecewiseExponential(self.cuts, self.hazards[i])
        return StepFunction(self.cuts, self.survival[i], 1.0, "survival")

    def evaluate(self, times):
        """Survival of every subject at ``times`` -> ``(n, len(times))``."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if self.interp == "exp":
            edges = np.concatenate([[0.0], self.cuts])
            H = np.concatenate([np.zeros((len(self), 1)),
                                np.cumsum(self.hazards * np.diff(edges), axis=1)], axis=1)
            j = np.clip(np.searchsorted(self.cuts, times, side="left"), 0, len(self.cuts) - 1)
            return np.exp(-(H[:, j] + self.hazards[:, j] * (times - edges[j])[None, :]))
        full = np.concatenate([np.ones((len(self), 1)), self.survival], axis=1)
        return full[:, np.searchsorted(self.cuts, times, side="right")]

    def cif_at(self, times):
        """CIFs at ``times`` -> ``(n, len(times), q)``."""
        if self.cif is None:
            raise ValueError("no cumulative incidence in this curve set")
        times = np.atleast_1d(np.asarray(times, dtype=float))
        n, J, q = self.cif.shape
        full = np.concatenate([np.zeros((n, 1, q)), self.cif], axis=1)
        if self.interp != "exp":
            return full[:, np.searchsorted(self.cuts, times, side="right"), :]
        j = np.clip(np.searchsorted(self.cuts, times, side="left"), 0, J - 1)
        S_prev = np.concatenate([np.ones((n, 1)), self.survival], axis=1)[:, j]
        total = self.hazards[:, j]
        hk = self.cause_hazards[:, j, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            share = np.where(total[:, :, None] > 0, hk / np.where(total > 0, total, 1)[:, :, None], 0)
        return full[:, j, :] + share * (S_prev - self.evaluate(times))[:, :, None]

    def rmst(self, tau):
        """Restricted mean survival time per subject (exact for both interps)."""
        tau = float(tau)
        if self.interp == "exp":
            return np.array([self.curve(i).integral(tau) for i in range(len(self))])
        edges = np.concatenate([[0.0], self.cuts[self.cuts < tau], [tau]])
        k = len(edges) - 1
        heights = np.concatenate([np.ones((len(self), 1)), self.survival], axis=1)[:, :k]
        return heights @ np.diff(edges)

    def to_csv(self, path, quantities=("survival",), tau=None):
        """Long CSV ``id,time,quantity,cause,value``."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "time", "quantity", "cause", "value"])
            for i, sid in enumerate(self.ids):
                for q in quantities:
                    for row in self._rows(i, q, tau):
                        w.writerow([sid] + row)

    def _rows(self, i, quantity, tau):
        cuts = self.cuts
        if quantity == "survival":
            return [[fmt_float(t), "survival", "", fmt_float(v)]
                    for t, v in zip(cuts, self.survival[i])]
        if quantity == "hazard":
            if self.hazards is None:
                raise ValueError("hazards are not available for this curve set")
            return [[fmt_float(t), "hazard", "", fmt_float(v)] for t, v in zip(cuts, self.hazards[i])]
        if quantity == "cif":
            if self.cif is None:
                raise ValueError("cif requested for a fit without causes")
            return [[fmt_float(t), "cif", lab, fmt_float(self.cif[i, j, k])]
                    for k, lab in enumerate(self.cause_labels) for j, t in enumerate(cuts)]
        if quantity == "rmst":
            tau = float(cuts[-1] if tau is None else tau)
            return [[fmt_float(tau), "rmst", "", fmt_float(self.rmst(tau)[i])]]
        if quantity == "transition":
            if self.transition is None:
                raise ValueError("transition requested for a fit without a state graph")
            s = self.states
            return [[fmt_float(t), "transition", f"{s[a]}->{s[b]}",
                     fmt_float(self.transition[i, j, a, b])]
                    for a in range(len(s)) for b in range(len(s)) for j, t in enumerate(cuts)]
        raise ValueError(f"unknown quantity {quantity!r}")


# fitted reduction -----------------------------------------------------------

def _features_to_dict(features):
    return [{"name": f.name, "kind": f.kind, "levels": list(f.levels)} for f in features]


def _features_from_dict(items):
    return tuple(Feature(d["name"], d["kind"], tuple(d["levels"])) for d in items)


def subject_matrix(task):
    """(ids, X) with one row per subject (first record of each subject)."""
    seen, rows = set(), []
    for r, i in enumerate(task.ids.tolist()):
        if i not in seen:
            seen.add(i)
            rows.append(r)
    rows = np.asarray(rows, dtype=np.int64)
    return task.ids[rows], task.X[rows]


def as_matrix(X, p):
    """Feature matrix ``(n, p)``; a 1-d input is read as a single subject."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != p:
        raise ValueError(f"expected a feature matrix with {p} columns, got shape {X.shape}")
    return X


def _check_schema(features, task_features):
    names = [f.name for f in features]
    got = [f.name for f in task_features]
    if names != got:
        raise ValueError(f"feature schema mismatch: model expects {names}, task has {got}")


def _recode(X, features, task_features):
    """Re-express categorical codes of ``X`` in the model's level order."""
    X = np.array(X, dtype=float)
    for k, (f, g) in enumerate(zip(features, task_features)):
        if f.kind == CATEGORICAL and g.kind == CATEGORICAL and f.levels != g.levels:
            index = {lv: c for c, lv in enumerate(f.levels)}
            remap = np.array([index.get(lv, len(f.levels)) for lv in g.levels], dtype=float)
            X[:, k] = remap[X[:, k].astype(np.int64)]
    return X


@dataclass(eq=False)
class FittedReduction:
    """A trained PEM or DT reduction with everything needed to predict."""

    method: str
    kind: str
    grid: CutGrid
    design: DesignSpec
    learners: list
    learner_spec: LearnerSpec
    formula: str
    features: tuple
    cause_labels: tuple = ()
    transitions: tuple = ()
    states: tuple = ()
    censoring: str = "previous"
    separate: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def q(self):
        return max(len(self.cause_labels), 1)

    @property
    def blocks(self):
        """Labels of the per-interval hazard blocks (causes or transitions)."""
        if self.kind == COMPETING:
            return tuple(self.cause_labels)
        if self.kind == MULTISTATE:
            return tuple(f"{a}->{b}" for a, b in self.transitions)
        return ("event",)

    # prediction frame ----------------------------------------------------

    def _frame(self, X, block=None, episode=1):
        """Rows (subject, interval) for one hazard block."""
        n, J = len(X), self.grid.J
        cols, levels = {}, {}
        for k, f in enumerate(self.features):
            v = np.repeat(X[:, k], J)
            if f.kind == CATEGORICAL:
                cols[f.name] = v.astype(np.int64)
                levels[f.name] = f.levels + ("<unseen>",)
            else:
                cols[f.name] = v
        cols["a_end"] = np.tile(self.grid.cuts, n)
        cols["interval"] = np.tile(np.arange(J), n)
        levels["interval"] = tuple(str(j) for j in range(1, J + 1))
        if self.kind == COMPETING:
            cols["cause"] = np.full(n * J, block, np.int64)
            levels["cause"] = tuple(self.cause_labels)
        if self.kind == MULTISTATE:
            a, b = self.transitions[block]
            labels = tuple(f"{x}->{y}" for x, y in self.transitions)
            cols["transition"] = np.full(n * J, block, np.int64)
            levels["transition"] = labels
            sidx = {s: i for i, s in enumerate(self.states)}
            cols["from"] = np.full(n * J, sidx[a], np.int64)
            cols["to"] = np.full(n * J, sidx[b], np.int64)
            levels["from"] = levels["to"] = self.states
            cols["episode"] = np.full(n * J, float(episode))
        return Frame(cols, levels)

    def _X(self, task_or_X):
        if hasattr(task_or_X, "X") and hasattr(task_or_X, "features"):
            _check_schema(self.features, task_or_X.features)
            ids, X = subject_matrix(task_or_X)
            return ids, _recode(X, self.features, task_or_X.features)
        X = as_matrix(task_or_X, len(self.features))
        return np.arange(1, len(X) + 1).astype(str).astype(object), X

    def hazards(self, task_or_X, episode=1):
        """Per-interval hazards ``(n, J, blocks)``: rates for PEM, discrete
        probabilities for DT."""
        ids, X = self._X(task_or_X)
        n, J = len(X), self.grid.J
        out = np.empty((n, J, len(self.blocks)))
        for b in range(len(self.blocks)):
            frame = self._frame(X, b, episode)
            learner = self.learners[b] if self.separate else self.learners[0]
            design = self.design[b] if self.separate else self.design
            eta = learner.predict_link(design.transform(frame))
            if self.method == PEM:
                out[:, :, b] = np.exp(np.minimum(eta, 700.0)).reshape(n, J)
            else:
                out[:, :, b] = expit(eta).reshape(n, J)
        return out

    def predict_hazard(self, task_or_X, tau):
        """Hazard in the interval containing ``tau`` (all-cause for competing risks)."""
        tau = float(tau)
        if tau > self.grid.cuts[-1]:
            warnings.warn(f"time {tau!r} beyond the last cut; last interval used",
                          ReductionWarning, stacklevel=2)
        j = min(int(np.searchsorted(self.grid.cuts, tau, side="left")), self.grid.J - 1)
        return self.hazards(task_or_X)[:, j, :].sum(axis=1)

    def predict(self, task_or_X, episode=1):
        """Back-map to a :class:`SurvivalCurveSet`."""
        ids, X = self._X(task_or_X)
        hz = self.hazards(X, episode)
        cuts = self.grid.cuts
        if self.kind == MULTISTATE:
            return self._predict_multistate(ids, hz)
        clipped = 0
        if self.method == PEM:
            S, cif = pem_curves(hz, cuts)
        else:
            S, cif, clipped = dt_curves(hz)
            if clipped:
                warnings.warn(f"all-cause discrete hazard capped in {clipped} cells",
                              ReductionWarning, stacklevel=2)
        curves = SurvivalCurveSet(ids, cuts, S, "exp" if self.method == PEM else "step",
                                  hz.sum(axis=2), clipped=clipped)
        if self.kind == COMPETING:
            curves.cif = cif
            curves.cause_labels = tuple(self.cause_labels)
            curves.cause_hazards = hz
        return curves

    def _predict_multistate(self, ids, hz):
        n, J, E = hz.shape
        s = len(self.states)
        sidx = {st: i for i, st in enumerate(self.states)}
        edges = [(sidx[a], sidx[b]) for a, b in self.transitions]
        trans = np.empty((n, J, s, s))
        clipped = 0
        for i in range(n):
            if self.method == PEM:
                P = np.eye(s)
                for j in range(J):
                    lo = 0.0 if j == 0 else self.grid.cuts[j - 1]
                    step = pem_transition_path(hz[i, j:j + 1], edges, s,
                                               [self.grid.cuts[j] - lo])
                    P = P @ step
                    trans[i, j] = P
            else:
                P = np.eye(s)
                for j in range(J):
                    step, c = dt_transition_path(hz[i, j:j + 1], edges, s)
                    clipped += c
                    P = P @ step
                    trans[i, j] = P
        if clipped:
            warnings.warn(f"transition hazards clipped in {clipped} rows", ReductionWarning,
                          stacklevel=3)
        S = trans[:, :, 0, 0]
        return SurvivalCurveSet(ids, self.grid.cuts, S, "step", None, transition=trans,
                                states=self.states, clipped=clipped)

    def transition_matrix(self, x, s=0.0, tau=None, episode=1):
        """``P(s, tau | x)`` for a multi-state fit. For DT, ``s``/``tau`` are
        mapped to the intervals containing them."""
        if self.kind != MULTISTATE:
            raise ValueError("transition matrices need a multi-state fit")
        X = np.asarray(x, dtype=float).reshape(1, -1)
        hz = self.hazards(X, episode)[0]
        sidx = {st: i for i, st in enumerate(self.states)}
        edges = [(sidx[a], sidx[b]) for a, b in self.transitions]
        cuts = self.grid.cuts
        tau = cuts[-1] if tau is None else float(tau)
        if self.method == PEM:
            return pem_transition_path(hz, edges, len(self.states), cuts, float(s), tau)
        j_s = int(np.searchsorted(cuts, s, side="right")) + 1
        j_t = int(np.searchsorted(cuts, tau, side="right"))
        P, clipped = dt_transition_path(hz, edges, len(self.states), j_s, j_t)
        if clipped:
            warnings.warn(f"transition hazards clipped in {clipped} rows", ReductionWarning,
                          stacklevel=2)
        return P

    # serialization -------------------------------------------------------

    def to_dict(self):
        design = [d.to_dict() for d in self.design] if self.separate else self.design.to_dict()
        return {"format": FORMAT, "version": VERSION, "model": "reduction",
                "method": self.method, "kind": self.kind, "grid": self.grid.to_dict(),
                "design": design, "learners": [m.to_dict() for m in self.learners],
                "learner_spec": self.learner_spec.to_dict(), "formula": self.formula,
                "features": _features_to_dict(self.features),
                "cause_labels": list(self.cause_labels),
                "transitions": [list(e) for e in self.transitions],
                "states": list(self.states), "censoring": self.censoring,
                "separate": self.separate, "meta": self.meta}

    @classmethod
    def from_dict(cls, d):
        separate = d["separate"]
        design = ([DesignSpec.from_dict(x) for x in d["design"]] if separate
                  else DesignSpec.from_dict(d["design"]))
        return cls(d["method"], d["kind"], CutGrid.from_dict(d["grid"]), design,
                   [load_learner(m) for m in d["learners"]], LearnerSpec.parse(d["learner_spec"]),
                   d["formula"], _features_from_dict(d["features"]), tuple(d["cause_labels"]),
                   tuple(tuple(e) for e in d["transitions"]), tuple(d["states"]),
                   d["censoring"], separate, d.get("meta", {}))


def _fit(method, task, grid, learner, formula, censoring, separate, holdout, seed):
    learner = LearnerSpec.parse(learner)
    if grid is None:
        grid = make_cuts(task)
    elif not isinstance(grid, CutGrid):
        grid = make_cuts(task, grid)
    formula = str(FormulaSpec.parse(formula or default_formula(task.kind)))
    long = expand(task, grid)
    if method == DT:
        long = long.take(dt_risk_rows(long, censoring))
    frame = long.frame()
    family = "poisson" if method == PEM else "binomial"
    holdout_mask = None
    if learner.name == "gbt" and learner.params.get("early_stop_rounds"):
        holdout_mask = subject_holdout(long.ids, holdout, seed)

    def fit_rows(rows, spec_formula):
        sub = frame.take(rows)
        design = DesignSpec.fit(sub, spec_formula, task.feature_names)
        Xd = design.transform(sub)
        y = long.d[rows].astype(float)
        off = long.offset[rows] if method == PEM else None
        if holdout_mask is None:
            return design, fit_learner(learner, Xd, y, off, None, family)
        h = holdout_mask[rows]
        Xv = Xd.values
        valid = (Xv[h], y[h], None if off is None else off[h], None)
        return design, fit_learner(learner, Xv[~h], y[~h], None if off is None else off[~h],
                                   None, family, valid)

    blocks = [None]
    if separate and task.kind in (COMPETING, MULTISTATE):
        col = "cause" if task.kind == COMPETING else "transition"
        codes = frame[col]
        blocks = [np.flatnonzero(codes == b) for b in range(len(frame.levels[col]))]
        stripped = FormulaSpec(tuple(t for t in FormulaSpec.parse(formula).terms
                                     if col not in t and "from" not in t and "to" not in t),
                               FormulaSpec.parse(formula).dot)
        fitted = [fit_rows(rows, stripped) for rows in blocks]
        design = [f[0] for f in fitted]
        learners = [f[1] for f in fitted]
    else:
        design, fitted = fit_rows(np.arange(len(frame)), formula)
        learners = [fitted]
        separate = False
    return FittedReduction(method, task.kind, grid, design, learners, learner, formula,
                           task.features, tuple(long.cause_labels), tuple(long.transitions),
                           task.states if task.kind == MULTISTATE else (),
                           censoring, bool(separate), {"n_rows": len(long)})


def pem_fit(task, grid=None, learner="glm", formula=None, separate=False, holdout=0.2, seed=0):
    """Fit the piecewise-exponential reduction.

    The learner sees one row per subject and interval with response ``d``
    and offset ``log(t)``. ``formula`` defaults to the features plus the
    interval end ``a_end`` (and ``cause``/``transition`` where relevant);
    use ``interval`` for a per-interval baseline and ``x*a_end`` or
    ``x*interval`` for time-varying effects.
    """
    return _fit(PEM, task, grid, learner, formula, "previous", separate, holdout, seed)


def dt_fit(task, grid=None, learner="glm", formula=None, separate=False, censoring="previous",
           holdout=0.2, seed=0):
    """Fit the discrete-time reduction (binary response ``d`` per interval).

    See :func:`dt_risk_rows` for the ``censoring`` rule.
    """
    return _fit(DT, task, grid, learner, formula, censoring, separate, holdout, seed)


def rmst(curve, tau):
    """Restricted mean survival time ``int_0^tau S(u) du`` of one curve."""
    return float(curve.integral(tau))


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path):
    """Load any serialized model (distributional or point reduction)."""
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return model_from_dict(d)


def model_from_dict(d):
    if d.get("format") != FORMAT:
        raise ValueError("not a survreduce model file")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model version {d.get('version')!r}")
    if d["model"] == "reduction":
        return FittedReduction.from_dict(d)
    from . import reduce_point

    return reduce_point.point_model_from_dict(d)
