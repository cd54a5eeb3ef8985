"""Point-estimate reductions: IPCW classification, CRM ranking targets and
jackknife pseudo-values."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .data import CATEGORICAL, COMPETING, SINGLE, fmt_float
from .estimators import (StepFunction, aalen_johansen, censoring_km, kaplan_meier,
                         risk_table)
from .learners import DesignSpec, Frame, LearnerSpec, fit_learner, load_learner
from .reduce_dist import (FORMAT, VERSION, ReductionWarning, _features_from_dict,
                          _features_to_dict, _check_schema, _recode, as_matrix,
                          subject_matrix)


class IdentifiabilityError(ValueError):
    pass


def _feature_cells(features, X, i):
    out = []
    for k, f in enumerate(features):
        v = X[i, k]
        out.append(f.levels[int(v)] if f.kind == CATEGORICAL else fmt_float(v))
    return out


def _frame(features, X, extra=None):
    cols, levels = {}, {}
    for k, f in enumerate(features):
        if f.kind == CATEGORICAL:
            cols[f.name] = X[:, k].astype(np.int64)
            levels[f.name] = f.levels + ("<unseen>",)
        else:
            cols[f.name] = X[:, k]
    cols.update(extra or {})
    return Frame(cols, levels, n=len(X))


def _require_single(task, what):
    if task.kind != SINGLE:
        raise ValueError(f"{what} needs a single-event task, got {task.kind}")


# IPCW -----------------------------------------------------------------------

@dataclass(eq=False)
class IpcwDataset:
    """Labels ``e_i = 1(t_i <= tau, d_i = 1)`` and weights ``1 / G(min(t_i, tau))``;
    subjects censored at or before ``tau`` get weight 0."""

    ids: np.ndarray
    tau: float
    labels: np.ndarray
    weights: np.ndarray
    G: StepFunction
    X: np.ndarray
    features: tuple

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "label", "weight"] + [f.name for f in self.features])
            for i, sid in enumerate(self.ids):
                w.writerow([sid, int(self.labels[i]), fmt_float(self.weights[i])]
                           + _feature_cells(self.features, self.X, i))


def ipcw_transform(task, tau, G=None):
    """IPCW classification data at horizon ``tau``.

    ``G`` defaults to the censoring Kaplan-Meier of ``task``. A subject
    censored exactly at ``tau`` gets weight 0; an event at ``tau`` is a case.
    """
    _require_single(task, "IPCW")
    tau = float(tau)
    if tau <= 0:
        raise ValueError("tau must be positive")
    t, d = task.time, task.status
    G = censoring_km(t, d) if G is None else G
    labels = ((t <= tau) & (d == 1)).astype(np.int64)
    keep = (labels == 1) | (t > tau)
    g = G(np.minimum(t, tau))
    bad = keep & (g <= 0)
    if bad.any():
        i = int(np.argmax(bad))
        raise IdentifiabilityError(f"censoring survival is 0 at {min(t[i], tau)!r} for subject "
                                   f"{task.ids[i]}; weights are not identifiable")
    weights = np.where(keep, 1.0 / np.where(keep, g, 1.0), 0.0)
    return IpcwDataset(task.ids, tau, labels, weights, G, task.X, task.features)


# CRM ------------------------------------------------------------------------

def crm_pairwise(i, j, times, status, S):
    """Probability that subject ``i`` fails before subject ``j``.

    ``S`` is the marginal Kaplan-Meier curve, evaluated at the observed
    times (value at ``t``). A zero denominator gives 0 when ``i`` has the
    event and 1/2 when both are censored.
    """
    if i == j:
        raise ValueError("pairwise probability needs i != j")
    ti, tj = float(times[i]), float(times[j])
    di, dj = int(status[i]), int(status[j])
    si, sj = float(S(ti)), float(S(tj))
    if di == 1 and dj == 1:
        return 1.0 if ti < tj else 0.0 if ti > tj else 0.5
    if di == 1:
        if ti <= tj:
            return 1.0
        return si / sj if sj > 0 else 0.0
    if dj == 1:
        return 1.0 - crm_pairwise(j, i, times, status, S)
    if ti <= tj:
        return 1.0 - (sj / (2.0 * si) if si > 0 else 0.5)
    return si / (2.0 * sj) if sj > 0 else 0.5


@dataclass(eq=False)
class CrmDataset:
    ids: np.ndarray
    targets: np.ndarray
    km: StepFunction
    X: np.ndarray
    features: tuple
    zero_denominators: int = 0

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "target"] + [f.name for f in self.features])
            for i, sid in enumerate(self.ids):
                w.writerow([sid, fmt_float(self.targets[i])]
                           + _feature_cells(self.features, self.X, i))


def crm_targets(task):
    """Targets ``r_i = mean_j p_ij``: the chance that ``i`` fails before a
    random other subject. Earliest failure gets 1."""
    _require_single(task, "CRM")
    n = len(task)
    if n < 2:
        raise ValueError("CRM needs at least two subjects")
    km = kaplan_meier(task.time, task.status)
    s = km(task.time)
    P = kernels.crm_matrix(task.time, task.status, s)
    # only censored subjects ever appear in a denominator
    zero = int(np.sum((s == 0) & (task.status == 0)))
    if zero:
        warnings.warn(f"{zero} censored subjects have zero Kaplan-Meier survival; limiting "
                      "conventions used for their pairs", ReductionWarning, stacklevel=2)
    return CrmDataset(task.ids, P.sum(axis=1) / (n - 1), km, task.X, task.features, zero)


# pseudo-values --------------------------------------------------------------

SURVIVAL, RMST, CIF, TRANSITION = "survival", "rmst", "cif", "transition"
QUANTITIES = (SURVIVAL, RMST, CIF, TRANSITION)


@dataclass(eq=False)
class PseudoValueSet:
    """Jackknife pseudo-values ``values[i, k]`` at ``taus[k]``."""

    ids: np.ndarray
    quantity: str
    taus: np.ndarray
    values: np.ndarray
    estimate: np.ndarray
    X: np.ndarray
    features: tuple
    target: str = ""

    def stacked(self):
        """(subject row index, tau, value) in (subject, tau) order."""
        n, K = self.values.shape
        return np.repeat(np.arange(n), K), np.tile(self.taus, n), self.values.reshape(-1)

    def to_csv(self, path):
        rows, taus, vals = self.stacked()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "tau", "pseudo_value"] + [f.name for f in self.features])
            for r, tau, v in zip(rows, taus, vals):
                w.writerow([self.ids[r], fmt_float(tau), fmt_float(v)]
                           + _feature_cells(self.features, self.X, r))


def default_taus(task, K=7):
    """``K`` type-1 quantiles of the event times at ``p = k / (K + 1)``."""
    ev = np.sort(task.time[task.status == 1])
    if len(ev) == 0:
        raise ValueError("no events to place evaluation times")
    p = np.arange(1, K + 1) / (K + 1)
    idx = np.clip(np.ceil(p * len(ev) - 1e-12).astype(int) - 1, 0, len(ev) - 1)
    return np.unique(ev[idx])


def _estimator(quantity, task, taus, target):
    """Full-sample estimate at ``taus`` on any (sub)task."""
    if quantity == SURVIVAL:
        return kaplan_meier(task.time, task.status)(taus)
    if quantity == RMST:
        km = kaplan_meier(task.time, task.status)
        return np.array([km.integral(t) for t in taus])
    path = aalen_johansen(task)
    return path.prob(path.states[0], target)(taus)


def jackknife_naive(task, quantity, taus, target=""):
    """Pseudo-values by explicit leave-one-subject-out recomputation."""
    taus = np.asarray(taus, dtype=float)
    subjects = task.subjects()
    n = len(subjects)
    full = _estimator(quantity, task, taus, target)
    out = np.empty((n, len(taus)))
    for i, sid in enumerate(subjects):
        rest = task.take(task.ids != sid)
        out[i] = n * full - (n - 1) * _estimator(quantity, rest, taus, target)
    return out, full


def pseudo_values(task, quantity=SURVIVAL, taus=None, target=None):
    """Jackknife pseudo-values ``n * theta - (n - 1) * theta^(-i)``.

    ``quantity`` is ``survival`` (Kaplan-Meier), ``rmst`` (area under it),
    ``cif`` (Aalen-Johansen CIF of cause ``target``) or ``transition``
    (occupation probability of state ``target`` starting from the initial
    state). Left-truncated tasks are rejected.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}")
    if task.is_left_truncated:
        raise ValueError("pseudo-values are not defined for left-truncated data")
    if task.n_subjects < 2:
        raise ValueError("pseudo-values need at least two subjects")
    taus = default_taus(task) if taus is None else np.sort(np.asarray(taus, dtype=float))
    if np.any(taus <= 0):
        raise ValueError("evaluation times must be positive")
    if taus[-1] > task.time.max():
        warnings.warn("evaluation time beyond the last observed time; the estimator is "
                      "extrapolated as a constant", ReductionWarning, stacklevel=2)
    if quantity in (SURVIVAL, RMST) and task.kind != SINGLE:
        raise ValueError(f"{quantity} pseudo-values need a single-event task")
    if quantity == CIF:
        if task.kind != COMPETING:
            raise ValueError("cif pseudo-values need a competing-risks task")
        target = task.cause_labels[0] if target is None else str(target)
        if target not in task.cause_labels:
            raise ValueError(f"unknown cause {target!r}")
    if quantity == TRANSITION:
        states = aalen_johansen(task).states
        target = states[0] if target is None else str(target)
        if target not in states:
            raise ValueError(f"unknown state {target!r}")
    n = len(task)
    if quantity in (SURVIVAL, RMST):
        u, n_risk, d = risk_table(task.time, task.status)
        pos = np.searchsorted(u, task.time)
        surv, area = kernels.loo_km(u, n_risk, d, pos, task.status, taus)
        loo = surv if quantity == SURVIVAL else area
        full = _estimator(quantity, task, taus, target)
        values = n * full[None, :] - (n - 1) * loo
        ids, X = task.ids, task.X
    elif quantity == CIF:
        u, n_risk, _ = risk_table(task.time, task.status)
        q = len(task.cause_labels)
        dk = np.zeros((len(u), q))
        ev = task.status == 1
        np.add.at(dk, (np.searchsorted(u, task.time[ev]), task.cause[ev] - 1), 1.0)
        pos = np.searchsorted(u, task.time)
        loo = kernels.loo_cif(u, n_risk, dk, pos, task.cause, taus)
        k = task.cause_labels.index(target)
        full = _estimator(CIF, task, taus, target)
        values = n * full[None, :] - (n - 1) * loo[:, :, k]
        ids, X = task.ids, task.X
    else:
        values, full = jackknife_naive(task, TRANSITION, taus, target)
        ids, X = subject_matrix(task)
    return PseudoValueSet(ids, quantity, taus, values, full, X, task.features, target or "")


# fitted point models --------------------------------------------------------

@dataclass(eq=False)
class PointFit:
    """Shared state of the IPCW, CRM and pseudo-value fits."""

    model: str
    design: DesignSpec
    learner: object
    learner_spec: LearnerSpec
    formula: str
    features: tuple
    tau: float | None = None
    taus: tuple = ()
    quantity: str = ""
    target: str = ""
    clip: bool = False
    censoring: dict = field(default_factory=dict)

    def _X(self, task_or_X):
        if hasattr(task_or_X, "X") and hasattr(task_or_X, "features"):
            _check_schema(self.features, task_or_X.features)
            ids, X = subject_matrix(task_or_X)
            return ids, _recode(X, self.features, task_or_X.features)
        X = as_matrix(task_or_X, len(self.features))
        return np.arange(1, len(X) + 1).astype(str).astype(object), X

    def _link(self, X, extra=None):
        return self.learner.predict_link(self.design.transform(_frame(self.features, X, extra)))

    def predict_risk(self, task_or_X):
        """IPCW: P(T <= tau | x); CRM: ranking score (higher = earlier failure)."""
        _, X = self._X(task_or_X)
        if self.model == "ipcw":
            return 1.0 / (1.0 + np.exp(-self._link(X)))
        if self.model == "crm":
            return self._link(X)
        raise ValueError("predict_risk applies to ipcw and crm fits")

    def predict_survival(self, task_or_X):
        """IPCW single-horizon survival ``1 - pi(x)``."""
        if self.model != "ipcw":
            raise ValueError("predict_survival applies to ipcw fits")
        return 1.0 - self.predict_risk(task_or_X)

    def predict(self, task_or_X, taus=None):
        """Pseudo-value regression prediction ``(n, K)`` at ``taus``."""
        if self.model != "pv":
            raise ValueError("predict applies to pseudo-value fits")
        _, X = self._X(task_or_X)
        taus = np.asarray(self.taus if taus is None else taus, dtype=float)
        n, K = len(X), len(taus)
        Xs = np.repeat(X, K, axis=0)
        out = self._link(Xs, {"tau": np.tile(taus, n)}).reshape(n, K)
        if self.clip and self.quantity in (SURVIVAL, CIF, TRANSITION):
            out = np.clip(out, 0.0, 1.0)
        return out

    def to_dict(self):
        return {"format": FORMAT, "version": VERSION, "model": self.model,
                "design": self.design.to_dict(), "learner": self.learner.to_dict(),
                "learner_spec": self.learner_spec.to_dict(), "formula": self.formula,
                "features": _features_to_dict(self.features), "tau": self.tau,
                "taus": list(self.taus), "quantity": self.quantity, "target": self.target,
                "clip": self.clip, "censoring": self.censoring}


def point_model_from_dict(d):
    if d["model"] not in ("ipcw", "crm", "pv"):
        raise ValueError(f"unknown model kind {d['model']!r}")
    return PointFit(d["model"], DesignSpec.from_dict(d["design"]), load_learner(d["learner"]),
                    LearnerSpec.parse(d["learner_spec"]), d["formula"],
                    _features_from_dict(d["features"]), d["tau"], tuple(d["taus"]),
                    d["quantity"], d["target"], d["clip"], d["censoring"])


def _fit_point(model, features, X, y, weights, family, learner, formula, extra=None, **kw):
    learner = LearnerSpec.parse(learner)
    if learner.params.get("early_stop_rounds"):
        learner = learner.with_params(early_stop_rounds=None)
    frame = _frame(features, X, extra)
    design = DesignSpec.fit(frame, formula, [f.name for f in features])
    fit = fit_learner(learner, design.transform(frame), y, None, weights, family)
    return PointFit(model, design, fit, learner, str(formula), tuple(features), **kw)


def ipcw_fit(task, tau, learner="glm", formula="."):
    """Weighted binary classifier of ``1(T <= tau)``."""
    data = ipcw_transform(task, tau)
    return _fit_point("ipcw", task.features, task.X, data.labels.astype(float), data.weights,
                      "binomial", learner, formula, tau=data.tau,
                      censoring=data.G.to_dict())


def crm_fit(task, learner="glm", formula="."):
    """Regression on CRM targets; predictions rank subjects by risk."""
    data = crm_targets(task)
    return _fit_point("crm", task.features, task.X, data.targets, None, "gaussian", learner,
                      formula)


def pv_fit(pvset, learner="glm", formula=". + tau", clip=False):
    """Squared-loss regression of stacked pseudo-values on features and ``tau``."""
    rows, taus, vals = pvset.stacked()
    X = pvset.X[rows]
    return _fit_point("pv", pvset.features, X, vals, None, "gaussian", learner, formula,
                      {"tau": taus}, taus=tuple(float(t) for t in pvset.taus),
                      quantity=pvset.quantity, target=pvset.target, clip=clip)
