"""Subject-grouped resampling, random-search tuning and the benchmark harness.

Each learner is scored on outer cross-validation folds. Inside every outer
training set a random search over the learner's declared space picks the
configuration with the best inner 3-fold score, which is then refit on the
whole outer training set. A learner that raises is replaced by the
Kaplan-Meier score for that fold and the row is flagged.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .data import SINGLE, fmt_float
from .estimators import censoring_km, kaplan_meier
from .metrics import default_tau_max, harrell_c, isbs
from .reduce_dist import dt_fit, pem_fit

METRICS = ("harrell_c", "isbs")
HIGHER_IS_BETTER = {"harrell_c": True, "isbs": False}
WORKERS_ENV = "SURVREDUCE_WORKERS"


# resampling -----------------------------------------------------------------

def default_repeats(n_events):
    """3 repeats up to 500 events, 2 up to 1000, then 1."""
    if n_events <= 500:
        return 3
    return 2 if n_events <= 1000 else 1


@dataclass
class ResamplingPlan:
    folds: int
    repeats: int
    seed: int
    assignment: dict  # subject id -> tuple of fold numbers, one per repeat

    @classmethod
    def make(cls, task, folds=3, repeats=None, seed=0):
        if folds < 2:
            raise ValueError("need at least 2 folds")
        subjects = task.subjects()
        if len(subjects) < folds:
            raise ValueError(f"{len(subjects)} subjects cannot fill {folds} folds")
        if repeats is None:
            repeats = default_repeats(task.n_events)
        rng = np.random.default_rng(seed)
        cols = []
        for _ in range(repeats):
            fold = np.empty(len(subjects), np.int64)
            fold[rng.permutation(len(subjects))] = np.arange(len(subjects)) % folds
            cols.append(fold)
        assignment = {s: tuple(int(c[k]) for c in cols) for k, s in enumerate(subjects.tolist())}
        return cls(folds, repeats, seed, assignment)


def grouped_cv(task, plan):
    """Yield ``(repeat, fold, train, test)``; all rows of a subject go to one side."""
    if task.n_subjects < plan.folds:
        raise ValueError(f"{task.n_subjects} subjects cannot fill {plan.folds} folds")
    try:
        fold_of = np.array([[plan.assignment[i][r] for r in range(plan.repeats)]
                            for i in task.ids.tolist()], dtype=np.int64).reshape(len(task), -1)
    except KeyError as exc:
        raise ValueError(f"subject {exc.args[0]!r} is not in the resampling plan") from None
    for r in range(plan.repeats):
        for f in range(plan.folds):
            test = fold_of[:, r] == f
            yield r, f, task.take(~test), task.take(test)


# learners -------------------------------------------------------------------

@dataclass(frozen=True)
class Param:
    name: str
    low: float
    high: float
    log: bool = False
    integer: bool = False

    def sample(self, rng):
        if self.log:
            v = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
        else:
            v = rng.uniform(self.low, self.high + (1 if self.integer else 0))
        return int(min(math.floor(v), self.high)) if self.integer else float(v)


class KMCurves:
    """Kaplan-Meier curve broadcast to every test subject."""

    def __init__(self, km, n):
        self.km = km
        self.n = n
        self.knots = km.knots

    def evaluate(self, times):
        return np.broadcast_to(self.km(np.atleast_1d(times)), (self.n, len(np.atleast_1d(times))))

    def rmst(self, tau):
        return np.full(self.n, self.km.integral(tau))


class KMModel:
    def __init__(self, task):
        self.km = kaplan_meier(task.time, task.status, task.entry)

    def curves(self, task):
        return KMCurves(self.km, len(task))


class ReductionModel:
    def __init__(self, fitted):
        self.fitted = fitted

    def curves(self, task):
        return self.fitted.predict(task)


def _fit_km(task, params, seed):
    return KMModel(task)


def _fit_reduction(method, formula, learner, task, params, seed):
    fit = pem_fit if method == "pem" else dt_fit
    spec = {"name": learner, "params": dict(params)}
    return ReductionModel(fit(task, learner=spec, formula=formula, seed=seed))


@dataclass(frozen=True)
class LearnerDef:
    name: str
    fit: object
    defaults: dict = field(default_factory=dict)
    space: tuple = ()


_GLM_SPACE = (Param("lam", 1e-4, 10.0, log=True),)
_GBT_DEFAULTS = {"learning_rate": 0.1, "max_depth": 3, "min_leaf": 20, "reg_lambda": 1.0,
                 "nrounds": 500, "early_stop_rounds": 30}
_GBT_SPACE = (Param("learning_rate", 0.01, 0.3, log=True),
              Param("max_depth", 1, 6, integer=True),
              Param("min_leaf", 5, 100, integer=True),
              Param("reg_lambda", 0.1, 10.0, log=True))
TIME_INTERACTIONS = ". + interval + .:a_end"

CATALOG = {
    "KM": LearnerDef("KM", _fit_km),
    "PH_GLM": LearnerDef("PH_GLM", partial(_fit_reduction, "pem", ". + interval", "glm"),
                         {"lam": 1e-3}, _GLM_SPACE),
    "PEM_GLM": LearnerDef("PEM_GLM", partial(_fit_reduction, "pem", TIME_INTERACTIONS, "glm"),
                          {"lam": 1e-3}, _GLM_SPACE),
    "DT_GLM": LearnerDef("DT_GLM", partial(_fit_reduction, "dt", TIME_INTERACTIONS, "glm"),
                         {"lam": 1e-3}, _GLM_SPACE),
    "PEM_GBT": LearnerDef("PEM_GBT", partial(_fit_reduction, "pem", ". + a_end", "gbt"),
                          _GBT_DEFAULTS, _GBT_SPACE),
    "DT_GBT": LearnerDef("DT_GBT", partial(_fit_reduction, "dt", ". + a_end", "gbt"),
                         _GBT_DEFAULTS, _GBT_SPACE),
}


def learner_def(name):
    if isinstance(name, LearnerDef):
        return name
    try:
        return CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown learner {name!r}; choose from {', '.join(CATALOG)}") from None


def default_budget(ldef):
    return 50 * len(ldef.space)


# scoring --------------------------------------------------------------------

def score_model(model, train, test):
    """``{"harrell_c": ..., "isbs": ...}`` of a fitted model on ``test``.

    The risk for the C-index is minus the restricted mean survival time at
    ``tau_max`` (the 80th percentile of training times); the censoring
    distribution for the Brier score comes from ``train``.
    """
    tau = default_tau_max(train.time)
    curves = model.curves(test)
    risk = -np.asarray(curves.rmst(tau), dtype=float)
    G = censoring_km(train.time, train.status)
    return {"harrell_c": harrell_c(risk, test.time, test.status),
            "isbs": isbs(curves, test.time, test.status, G, tau)}


def _better(metric, a, b):
    return a > b if HIGHER_IS_BETTER[metric] else a < b


def tune(ldef, task, metric, budget, seed):
    """Random search; returns the best parameter dict (defaults when budget is 0)."""
    params = dict(ldef.defaults)
    if budget <= 0 or not ldef.space:
        return params
    rng = np.random.default_rng(seed)
    inner = ResamplingPlan.make(task, 3, 1, seed)
    splits = list(grouped_cv(task, inner))
    best, best_score = params, None
    for k in range(budget):
        cand = dict(ldef.defaults)
        if k > 0:
            cand.update({p.name: p.sample(rng) for p in ldef.space})
        try:
            scores = [score_model(ldef.fit(tr, cand, seed), tr, te)[metric]
                      for _, _, tr, te in splits]
        except Exception:  # noqa: BLE001 - failing candidates are skipped
            continue
        value = float(np.mean(scores))
        if best_score is None or _better(metric, value, best_score):
            best, best_score = cand, value
    return best


@dataclass(frozen=True)
class ScoreRow:
    task: str
    learner: str
    repeat: int
    fold: int
    metric: str
    value: float
    fallback: bool


class ScoreTable:
    HEADER = ["task", "learner", "repeat", "fold", "metric", "value", "fallback"]

    def __init__(self, rows=()):
        self.rows = sorted(rows, key=lambda r: (r.task, r.learner, r.repeat, r.fold, r.metric))

    def __len__(self):
        return len(self.rows)

    def values(self, task, learner, metric):
        return np.array([r.value for r in self.rows
                         if r.task == task and r.learner == learner and r.metric == metric])

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for r in self.rows:
                w.writerow([r.task, r.learner, r.repeat, r.fold, r.metric, fmt_float(r.value),
                            int(r.fallback)])

    def aggregate(self):
        """``(task, learner, metric, mean, sd, n, fallbacks)`` with scores x100."""
        groups = {}
        for r in self.rows:
            groups.setdefault((r.task, r.learner, r.metric), []).append(r)
        out = []
        for (task, learner, metric), rows in groups.items():
            v = np.array([r.value for r in rows]) * 100
            sd = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
            out.append((task, learner, metric, float(v.mean()), sd, len(v),
                        sum(r.fallback for r in rows)))
        return out

    def aggregate_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["task", "learner", "metric", "mean", "sd", "n", "fallbacks"])
            for task, learner, metric, mean, sd, n, fb in self.aggregate():
                w.writerow([task, learner, metric, f"{mean:.2f}", f"{sd:.2f}", n, fb])


def _run_fold(job):
    task_name, train, test, lname, metric, budget, seed = job
    ldef = learner_def(lname)
    fallback = False
    try:
        params = tune(ldef, train, metric, budget, seed)
        scores = score_model(ldef.fit(train, params, seed), train, test)
        if not all(np.isfinite(v) for v in scores.values()):
            raise ArithmeticError("non-finite score")
    except Exception:  # noqa: BLE001 - any learner failure falls back to KM
        scores = score_model(KMModel(train), train, test)
        fallback = True
    return task_name, lname, scores, fallback


def workers_from_env(default=1):
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def benchmark(tasks, learners, metric="harrell_c", budget=0, folds=3, repeats=None, seed=0,
              workers=None):
    """Run the nested benchmark.

    ``tasks`` maps names to single-event tasks; ``learners`` are catalog
    names. ``budget`` is the number of random-search candidates per outer
    fold (``None`` for 50 per tunable parameter, 0 for defaults only).
    Results do not depend on ``workers``.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    names = [learner_def(n).name for n in learners]
    jobs, keys = [], []
    for t_index, (task_name, task) in enumerate(tasks.items()):
        if task.kind != SINGLE:
            raise ValueError(f"task {task_name!r}: the benchmark scores single-event tasks only")
        plan = ResamplingPlan.make(task, folds, repeats, seed + t_index)
        for r, f, train, test in grouped_cv(task, plan):
            for l_index, lname in enumerate(names):
                ldef = learner_def(lname)
                b = default_budget(ldef) if budget is None else int(budget)
                job_seed = int(np.random.SeedSequence([seed, t_index, r, f, l_index])
                               .generate_state(1)[0])
                jobs.append((task_name, train, test, lname, metric, b, job_seed))
                keys.append((r, f))
    workers = workers_from_env() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_fold, jobs))
    else:
        results = [_run_fold(j) for j in jobs]
    rows = []
    for (r, f), (task_name, lname, scores, fallback) in zip(keys, results):
        for m, v in scores.items():
            rows.append(ScoreRow(task_name, lname, r, f, m, float(v), fallback))
    return ScoreTable(rows)
