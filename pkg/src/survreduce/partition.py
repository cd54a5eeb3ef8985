"""Cut grids and the long-format expansion shared by the PEM and DT reductions."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import COMPETING, MULTISTATE, SINGLE, CATEGORICAL, fmt_float, windows
from .learners.design import Frame


class GridWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CutStrategy:
    """How to place cut points.

    kind is one of ``equidistant`` (``n`` intervals or fixed ``width``),
    ``quantiles`` (``n`` event-time quantiles), ``events`` (every unique
    event time) or ``explicit`` (``cuts`` given).
    """

    kind: str = "quantiles"
    n: int | None = None
    width: float | None = None
    cuts: tuple[float, ...] | None = None

    @classmethod
    def parse(cls, text):
        """Parse ``quantiles:20``, ``equidistant:10``, ``width:0.5``, ``events``
        or ``explicit:0.5,1,1.5``."""
        kind, _, arg = text.strip().partition(":")
        kind = kind.strip().lower()
        if kind in ("quantiles", "event-quantiles"):
            return cls("quantiles", n=int(arg) if arg else None)
        if kind == "equidistant":
            return cls("equidistant", n=int(arg))
        if kind == "width":
            return cls("equidistant", width=float(arg))
        if kind in ("events", "all-event-times"):
            return cls("events")
        if kind == "explicit":
            return cls("explicit", cuts=tuple(float(v) for v in arg.split(",") if v.strip()))
        raise ValueError(f"unknown cut strategy {text!r}")

    def __str__(self):
        if self.kind == "equidistant":
            return f"width:{self.width!r}" if self.width is not None else f"equidistant:{self.n}"
        if self.kind == "explicit":
            return "explicit:" + ",".join(repr(c) for c in self.cuts)
        if self.kind == "quantiles" and self.n is not None:
            return f"quantiles:{self.n}"
        return self.kind


@dataclass(frozen=True, eq=False)
class CutGrid:
    """Cut points ``a_1 < ... < a_J`` with implicit ``a_0 = 0``.

    Interval ``j`` (1-based) is ``(a_{j-1}, a_j]``.
    """

    cuts: np.ndarray
    strategy: str = "explicit"
    truncated: bool = False

    def __post_init__(self):
        cuts = np.array(self.cuts, dtype=float)
        if cuts.ndim != 1 or len(cuts) == 0:
            raise ValueError("a cut grid needs at least one cut")
        if cuts[0] <= 0 or np.any(np.diff(cuts) <= 0):
            raise ValueError("cuts must be positive and strictly increasing")
        cuts.setflags(write=False)
        object.__setattr__(self, "cuts", cuts)

    @property
    def J(self):
        return len(self.cuts)

    @property
    def edges(self):
        return np.concatenate([[0.0], self.cuts])

    @property
    def widths(self):
        return np.diff(self.edges)

    def interval_of(self, t):
        """1-based index of the interval containing ``t`` (right-closed)."""
        return np.searchsorted(self.cuts, t, side="left") + 1

    def __eq__(self, other):
        return isinstance(other, CutGrid) and np.array_equal(self.cuts, other.cuts)

    def to_dict(self):
        return {"cuts": [float(c) for c in self.cuts], "strategy": self.strategy,
                "truncated": self.truncated}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["cuts"], dtype=float), d.get("strategy", "explicit"),
                   bool(d.get("truncated", False)))


def _type1_quantiles(sorted_values, probs):
    m = len(sorted_values)
    idx = np.ceil(np.asarray(probs) * m - 1e-12).astype(int) - 1
    return sorted_values[np.clip(idx, 0, m - 1)]


def make_cuts(task, strategy=None):
    """Build a :class:`CutGrid` covering every observed time of ``task``.

    The default is ``quantiles`` with ``J = min(20, #unique event times)``.
    Data-driven grids get a final cut at the largest observed time when it
    lies beyond the last event time.
    """
    if strategy is None:
        strategy = CutStrategy()
    elif isinstance(strategy, str):
        strategy = CutStrategy.parse(strategy)
    tmax = float(task.time.max())
    events = np.unique(task.time[task.status == 1])
    truncated = False
    if strategy.kind == "equidistant":
        if strategy.width is not None:
            if strategy.width <= 0:
                raise ValueError("width must be positive")
            k = max(1, math.ceil(tmax / strategy.width - 1e-9))
            cuts = strategy.width * np.arange(1, k + 1)
            if cuts[-1] < tmax:
                cuts = np.append(cuts, strategy.width * (k + 1))
        else:
            if not strategy.n or strategy.n < 1:
                raise ValueError("equidistant grid needs J >= 1")
            cuts = tmax * np.arange(1, strategy.n + 1) / strategy.n
            cuts[-1] = tmax
    elif strategy.kind == "quantiles":
        if len(events) == 0:
            raise ValueError("quantile grid needs at least one event")
        J = strategy.n if strategy.n is not None else min(20, len(events))
        if J < 1:
            raise ValueError("quantile grid needs J >= 1")
        sorted_events = np.sort(task.time[task.status == 1])
        cuts = np.unique(_type1_quantiles(sorted_events, np.arange(1, J + 1) / J))
        if len(cuts) < J:
            truncated = True
            warnings.warn(f"requested {J} quantile cuts, only {len(cuts)} distinct "
                          "event-time quantiles exist", GridWarning, stacklevel=2)
        if cuts[-1] < tmax:
            cuts = np.append(cuts, tmax)
    elif strategy.kind == "events":
        if len(events) == 0:
            raise ValueError("event grid needs at least one event")
        cuts = events if events[-1] >= tmax else np.append(events, tmax)
    elif strategy.kind == "explicit":
        cuts = np.asarray(strategy.cuts, dtype=float)
        if len(cuts) == 0 or cuts[-1] < tmax:
            raise ValueError(f"explicit cuts must reach the largest observed time {tmax!r}")
    else:
        raise ValueError(f"unknown cut strategy {strategy.kind!r}")
    return CutGrid(cuts, str(strategy), truncated)


# long format ----------------------------------------------------------------

@dataclass(eq=False)
class LongData:
    """One row per (source row, interval[, cause or transition]).

    ``source`` indexes the rows of the originating task. ``tstart``/``tend``
    are the interval bounds ``a_{j-1}``/``a_j``; ``t`` is the time at risk and
    ``offset = log(t)``. ``censored`` marks rows whose source record ended
    in censoring and ``exit`` is that record's exit time.
    """

    grid: CutGrid
    kind: str
    source: np.ndarray
    ids: np.ndarray
    j: np.ndarray
    tstart: np.ndarray
    tend: np.ndarray
    d: np.ndarray
    t: np.ndarray
    offset: np.ndarray
    X: np.ndarray
    features: tuple
    censored: np.ndarray
    exit: np.ndarray
    cause: np.ndarray | None = None
    cause_labels: tuple = ()
    from_state: np.ndarray | None = None
    to_state: np.ndarray | None = None
    episode: np.ndarray | None = None
    transitions: tuple = ()

    def __len__(self):
        return len(self.d)

    @property
    def q(self):
        return max(len(self.cause_labels), 1)

    def take(self, rows):
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        opt = lambda a: None if a is None else a[rows]  # noqa: E731
        return LongData(self.grid, self.kind, self.source[rows], self.ids[rows], self.j[rows],
                        self.tstart[rows], self.tend[rows], self.d[rows], self.t[rows],
                        self.offset[rows], self.X[rows], self.features, self.censored[rows],
                        self.exit[rows], opt(self.cause), self.cause_labels,
                        opt(self.from_state), opt(self.to_state), opt(self.episode),
                        self.transitions)

    def transition_labels(self):
        return np.array([f"{a}->{b}" for a, b in zip(self.from_state, self.to_state)], dtype=object)

    def frame(self):
        """Learner-facing columns: features plus ``a_end``, ``interval``,
        ``cause``/``transition``/``from``/``to``/``episode`` where present."""
        cols, levels = {}, {}
        for k, f in enumerate(self.features):
            if f.kind == CATEGORICAL:
                cols[f.name] = self.X[:, k].astype(np.int64)
                levels[f.name] = f.levels
            else:
                cols[f.name] = self.X[:, k]
        cols["a_end"] = self.tend
        cols["interval"] = self.j - 1
        levels["interval"] = tuple(str(j) for j in range(1, self.grid.J + 1))
        if self.cause is not None:
            cols["cause"] = self.cause - 1
            levels["cause"] = tuple(self.cause_labels) or ("1",)
        if self.from_state is not None:
            labels = tuple(f"{a}->{b}" for a, b in self.transitions)
            index = {lab: i for i, lab in enumerate(labels)}
            cols["transition"] = np.array([index[s] for s in self.transition_labels()], np.int64)
            levels["transition"] = labels
            states = tuple(dict.fromkeys(s for e in self.transitions for s in e))
            sidx = {s: i for i, s in enumerate(states)}
            cols["from"] = np.array([sidx[s] for s in self.from_state], np.int64)
            cols["to"] = np.array([sidx[s] for s in self.to_state], np.int64)
            levels["from"] = levels["to"] = states
            cols["episode"] = self.episode.astype(float)
        return Frame(cols, levels)

    def to_csv(self, path):
        """Write ``id,j,tstart,tend,d,t,offset[,cause][,from,to,episode],<features>``."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["id", "j", "tstart", "tend", "d", "t", "offset"]
            if self.cause is not None:
                head.append("cause")
            if self.from_state is not None:
                head += ["from", "to", "episode"]
            w.writerow(head + [f.name for f in self.features])
            for r in range(len(self)):
                row = [self.ids[r], int(self.j[r]), fmt_float(self.tstart[r]),
                       fmt_float(self.tend[r]), int(self.d[r]), fmt_float(self.t[r]),
                       fmt_float(self.offset[r])]
                if self.cause is not None:
                    row.append(self.cause_labels[self.cause[r] - 1] if self.cause_labels
                               else int(self.cause[r]))
                if self.from_state is not None:
                    row += [self.from_state[r], self.to_state[r], int(self.episode[r])]
                for k, f in enumerate(self.features):
                    v = self.X[r, k]
                    row.append(f.levels[int(v)] if f.kind == CATEGORICAL else fmt_float(v))
                w.writerow(row)


def _expand(entry, exit, cuts):
    """Vectorised interval expansion of windows ``(entry, exit]``.

    Returns (source row, 0-based interval, time at risk, is-last-interval).
    """
    if np.any(exit > cuts[-1]):
        bad = int(np.argmax(exit > cuts[-1]))
        raise ValueError(f"observed time {exit[bad]!r} exceeds the last cut {cuts[-1]!r}; "
                         "the grid must cover the data")
    edges = np.concatenate([[0.0], cuts])
    first = np.searchsorted(cuts, entry, side="right")
    last = np.searchsorted(cuts, exit, side="left")
    counts = last - first + 1
    src = np.repeat(np.arange(len(exit)), counts)
    starts = np.cumsum(counts) - counts
    j0 = first[src] + (np.arange(counts.sum()) - starts[src])
    t = np.minimum(exit[src], edges[j0 + 1]) - np.maximum(entry[src], edges[j0])
    return src, j0, t, j0 == last[src]


def _finish(grid, kind, task, src, j0, t, d, rows_censored, rows_exit, **extra):
    edges = grid.edges
    X = task.X[src]
    return LongData(grid=grid, kind=kind, source=src, ids=task.ids[src], j=j0 + 1,
                    tstart=edges[j0], tend=edges[j0 + 1], d=d.astype(np.int64), t=t,
                    offset=np.log(t), X=X, features=task.features, censored=rows_censored,
                    exit=rows_exit, **extra)


def expand_single_event(task, grid):
    """Long-format expansion of a single-event (possibly left-truncated) task.

    Subject ``i`` gets one row per interval overlapping ``(entry_i, t_i]``;
    an interval cut by the entry time contributes only ``a_j - entry_i``.
    """
    if task.kind == MULTISTATE:
        raise ValueError("use expand_multistate for multi-state tasks")
    src, j0, t, is_last = _expand(task.entry, task.time, grid.cuts)
    d = is_last & (task.status[src] == 1)
    return _finish(grid, SINGLE, task, src, j0, t, d, task.status[src] == 0, task.time[src])


def expand_competing_risks(task, grid):
    """Stack ``q`` cause-specific copies of the single-event expansion.

    In copy ``k`` only events of cause ``k`` count; other causes are
    treated as censoring. Rows are ordered by (subject, cause, interval).
    """
    base = expand_single_event(task, grid)
    q = max(len(task.cause_labels), 1)
    n = len(base)
    # (subject, cause, j) ordering: for each subject block, repeat its rows per cause
    k = np.tile(np.arange(1, q + 1), n)
    rows = np.repeat(np.arange(n), q)
    order = np.lexsort((base.j[rows], k, base.source[rows]))
    rows, k = rows[order], k[order]
    sub = base.take(rows)
    subject_cause = task.cause[sub.source] if task.cause is not None else np.ones(len(sub), int)
    if not task.cause_labels:
        subject_cause = np.where(task.status[sub.source] == 1, 1, 0)
    sub.d = (sub.d.astype(bool) & (subject_cause == k)).astype(np.int64)
    sub.cause = k.astype(np.int64)
    sub.cause_labels = tuple(task.cause_labels) or ("1",)
    sub.kind = COMPETING
    return sub


def expand_multistate(task, grid):
    """Expand start-stop windows for every transition out of their state.

    The observed transition carries ``d = 1`` in the exit interval; each
    competing transition out of the same state is added as a counterfactual
    copy with ``d = 0`` over the same window.
    """
    if task.kind != MULTISTATE:
        raise ValueError("expand_multistate needs a multi-state task")
    graph = list(task.state_graph)
    out_edges = {}
    for a, b in graph:
        out_edges.setdefault(a, []).append(b)
    rep, status, to_state, from_state = [], [], [], []
    for r, st in windows(task):
        a, b = task.from_state[r], task.to_state[r]
        if (a, b) not in set(graph):
            raise ValueError(f"transition {a}->{b} of subject {task.ids[r]} is not in the state graph")
        for target in out_edges[a]:
            rep.append(r)
            from_state.append(a)
            to_state.append(target)
            status.append(1 if (st == 1 and target == b) else 0)
    rep = np.asarray(rep, dtype=np.int64)
    window_status = np.asarray(status, dtype=np.int64)
    window_censored = np.array([task.status[r] == 0 for r in rep], dtype=bool)
    src_w, j0, t, is_last = _expand(task.entry[rep], task.time[rep], grid.cuts)
    src = rep[src_w]
    d = is_last & (window_status[src_w] == 1)
    return _finish(grid, MULTISTATE, task, src, j0, t, d, window_censored[src_w],
                   task.time[src],
                   from_state=np.asarray(from_state, dtype=object)[src_w],
                   to_state=np.asarray(to_state, dtype=object)[src_w],
                   episode=task.episode[src], transitions=tuple(graph))


def expand(task, grid):
    """Dispatch to the expansion matching ``task.kind``."""
    if task.kind == MULTISTATE:
        return expand_multistate(task, grid)
    if task.kind == COMPETING:
        return expand_competing_risks(task, grid)
    return expand_single_event(task, grid)
