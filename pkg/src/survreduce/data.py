"""Survival data model, validation and CSV ingestion/export.

A :class:`SurvivalTask` stores subject records column-wise as read-only numpy
arrays. Single-event and competing-risks tasks hold one row per subject;
multi-state tasks hold one row per start-stop window.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

SINGLE = "single-event"
COMPETING = "competing-risks"
MULTISTATE = "multi-state"
KINDS = (SINGLE, COMPETING, MULTISTATE)

NUMERIC = "numeric"
CATEGORICAL = "categorical"

# censored rows may carry an empty cause or the conventional "0"
_NO_CAUSE = ("", "0")


class DataError(ValueError):
    """Malformed or invalid survival data."""


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str = NUMERIC
    levels: tuple[str, ...] = ()


@dataclass(frozen=True)
class SubjectRecord:
    id: object
    time: float
    status: int
    entry: float = 0.0
    cause: str | None = None
    features: tuple = ()


@dataclass(frozen=True)
class StartStopRecord:
    id: object
    from_state: str
    to_state: str
    episode: int
    entry: float
    exit: float
    status: int
    features: tuple = ()


@dataclass(frozen=True)
class Violation:
    row: int | None
    message: str

    def __str__(self):
        return self.message if self.row is None else f"row {self.row}: {self.message}"


def _readonly(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurvivalTask:
    """Immutable container for a survival task.

    For multi-state tasks ``entry``/``time`` are the window bounds
    ``(tstart, tstop]`` of each start-stop row and ``status`` flags whether
    the ``from_state -> to_state`` transition happened at ``time``.
    ``cause`` holds integer codes ``1..q`` (0 for censored rows) indexing
    ``cause_labels``.
    """

    kind: str
    ids: np.ndarray
    time: np.ndarray
    status: np.ndarray
    X: np.ndarray
    features: tuple[Feature, ...] = ()
    entry: np.ndarray | None = None
    cause: np.ndarray | None = None
    cause_labels: tuple[str, ...] = ()
    from_state: np.ndarray | None = None
    to_state: np.ndarray | None = None
    episode: np.ndarray | None = None
    state_graph: tuple[tuple[str, str], ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.time)
        put = object.__setattr__
        put(self, "time", _readonly(self.time, float))
        put(self, "status", _readonly(self.status, np.int64))
        put(self, "ids", _readonly(np.asarray(self.ids, dtype=object)))
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(n, -1)
        put(self, "X", _readonly(X))
        put(self, "entry", _readonly(np.zeros(n) if self.entry is None else self.entry, float))
        put(self, "cause", _readonly(np.zeros(n, np.int64) if self.cause is None else self.cause, np.int64))
        if self.from_state is not None:
            put(self, "from_state", _readonly(np.asarray(self.from_state, dtype=str).astype(object)))
            put(self, "to_state", _readonly(np.asarray(self.to_state, dtype=str).astype(object)))
            ep = np.ones(n, np.int64) if self.episode is None else self.episode
            put(self, "episode", _readonly(ep, np.int64))
        put(self, "state_graph", tuple((str(a), str(b)) for a, b in self.state_graph))
        put(self, "cause_labels", tuple(str(c) for c in self.cause_labels))
        put(self, "features", tuple(self.features))

    # construction -----------------------------------------------------------

    @classmethod
    def from_arrays(cls, time, status, X=None, *, ids=None, entry=None, cause=None,
                    feature_names=None, kind=None, cause_labels=None):
        """Build a single-event or competing-risks task from plain arrays.

        ``cause`` may hold arbitrary labels; censored rows should carry
        ``None``, ``0`` or ``""``. Labels map to codes ``1..q`` in order of
        first appearance unless ``cause_labels`` fixes the order.
        """
        time = np.asarray(time, dtype=float)
        n = len(time)
        X = np.zeros((n, 0)) if X is None else np.asarray(X, dtype=float).reshape(n, -1)
        names = feature_names or [f"x{k + 1}" for k in range(X.shape[1])]
        features = tuple(Feature(str(nm)) for nm in names)
        ids = np.arange(1, n + 1).astype(str) if ids is None else np.asarray(ids).astype(str)
        codes = None
        labels: tuple[str, ...] = ()
        if cause is not None:
            raw = [None if c is None else str(c) for c in cause]
            labels = list(cause_labels or [])
            codes = np.zeros(n, np.int64)
            for i, c in enumerate(raw):
                if c is None or c in _NO_CAUSE:
                    continue
                if c not in labels:
                    if cause_labels is not None:
                        raise DataError(f"unknown cause label {c!r}")
                    labels.append(c)
                codes[i] = labels.index(c) + 1
            labels = tuple(labels)
        if kind is None:
            kind = COMPETING if cause is not None else SINGLE
        return cls(kind=kind, ids=ids, time=time, status=status, X=X, features=features,
                   entry=entry, cause=codes, cause_labels=labels)

    @classmethod
    def from_start_stop(cls, ids, from_state, to_state, entry, exit, status, X=None, *,
                        episode=None, state_graph=None, feature_names=None):
        exit = np.asarray(exit, dtype=float)
        n = len(exit)
        X = np.zeros((n, 0)) if X is None else np.asarray(X, dtype=float).reshape(n, -1)
        names = feature_names or [f"x{k + 1}" for k in range(X.shape[1])]
        fs = [str(s) for s in from_state]
        ts = [str(s) for s in to_state]
        if state_graph is None:
            state_graph = list(dict.fromkeys(zip(fs, ts)))
        return cls(kind=MULTISTATE, ids=np.asarray(ids).astype(str), time=exit, status=status,
                   X=X, features=tuple(Feature(str(nm)) for nm in names), entry=entry,
                   from_state=fs, to_state=ts, episode=episode, state_graph=tuple(state_graph))

    # accessors --------------------------------------------------------------

    def __len__(self):
        return len(self.time)

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def feature_names(self):
        return [f.name for f in self.features]

    @property
    def q(self):
        """Number of causes (1 for single-event tasks)."""
        return max(len(self.cause_labels), 1)

    @property
    def states(self):
        """State labels in order of first appearance in the state graph."""
        out = []
        for a, b in self.state_graph:
            for s in (a, b):
                if s not in out:
                    out.append(s)
        return tuple(out)

    def subjects(self):
        """Unique subject ids in order of first appearance."""
        return np.array(list(dict.fromkeys(self.ids.tolist())), dtype=object)

    @property
    def n_subjects(self):
        return len(self.subjects())

    @property
    def n_events(self):
        return int(self.status.sum())

    @property
    def is_left_truncated(self):
        if self.kind != MULTISTATE:
            return bool(np.any(self.entry > 0))
        first = {}
        for i, e in zip(self.ids, self.entry):
            first[i] = min(first.get(i, np.inf), e)
        return any(v > 0 for v in first.values())

    @property
    def records(self):
        """Row-wise view as :class:`SubjectRecord` / :class:`StartStopRecord`."""
        feats = [tuple(self._feature_value(i, k) for k in range(self.n_features))
                 for i in range(len(self))]
        if self.kind == MULTISTATE:
            return [StartStopRecord(self.ids[i], self.from_state[i], self.to_state[i],
                                    int(self.episode[i]), float(self.entry[i]),
                                    float(self.time[i]), int(self.status[i]), feats[i])
                    for i in range(len(self))]
        return [SubjectRecord(self.ids[i], float(self.time[i]), int(self.status[i]),
                              float(self.entry[i]),
                              self.cause_labels[self.cause[i] - 1] if self.cause[i] > 0 else None,
                              feats[i])
                for i in range(len(self))]

    def _feature_value(self, i, k):
        f = self.features[k]
        v = self.X[i, k]
        if f.kind == CATEGORICAL:
            return f.levels[int(v)]
        return float(v)

    def take(self, rows):
        """Sub-task with the given row indices (or boolean mask)."""
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        opt = lambda a: None if a is None else a[rows]  # noqa: E731
        return SurvivalTask(kind=self.kind, ids=self.ids[rows], time=self.time[rows],
                            status=self.status[rows], X=self.X[rows], features=self.features,
                            entry=self.entry[rows], cause=self.cause[rows],
                            cause_labels=self.cause_labels, from_state=opt(self.from_state),
                            to_state=opt(self.to_state), episode=opt(self.episode),
                            state_graph=self.state_graph, meta=dict(self.meta))

    def select_subjects(self, subject_ids):
        keep = set(np.asarray(subject_ids, dtype=object).tolist())
        return self.take(np.array([i in keep for i in self.ids.tolist()], dtype=bool))

    def frame(self):
        from .learners.design import Frame

        cols, levels = {}, {}
        for k, f in enumerate(self.features):
            if f.kind == CATEGORICAL:
                cols[f.name] = self.X[:, k].astype(np.int64)
                levels[f.name] = f.levels
            else:
                cols[f.name] = self.X[:, k]
        return Frame(cols, levels)


# validation -----------------------------------------------------------------

def validate(task):
    """Return every invariant violation of ``task`` (empty list iff valid)."""
    out = []
    n = len(task)
    if n == 0:
        return [Violation(None, "task has no records")]
    if task.kind not in KINDS:
        out.append(Violation(None, f"unknown task kind {task.kind!r}"))
    if task.X.shape[0] != n or task.X.shape[1] != len(task.features):
        out.append(Violation(None, "feature matrix does not match feature schema"))
    elif not np.all(np.isfinite(task.X)):
        bad = int(np.argwhere(~np.isfinite(task.X))[0, 0])
        out.append(Violation(bad + 1, "missing or non-finite feature value"))
    for i in range(n):
        t, e, d = task.time[i], task.entry[i], task.status[i]
        if not (math.isfinite(t) and math.isfinite(e)):
            out.append(Violation(i + 1, "times must be finite"))
        elif e < 0:
            out.append(Violation(i + 1, "entry must be non-negative"))
        elif not t > e:
            out.append(Violation(i + 1, "time must exceed entry"))
        if d not in (0, 1):
            out.append(Violation(i + 1, "status must be 0 or 1"))
    if task.kind == SINGLE:
        if task.cause_labels or np.any(task.cause != 0):
            out.append(Violation(None, "single-event task must not carry cause labels"))
    elif task.kind == COMPETING:
        present = set(task.cause[task.status == 1].tolist())
        if len(task.cause_labels) < 2 or len(present) < 2:
            out.append(Violation(None, "q ≥ 2 causes required for a competing-risks task"))
        for i in range(n):
            if task.cause[i] > 0 and task.status[i] != 1:
                out.append(Violation(i + 1, "cause present requires status = 1"))
            elif task.status[i] == 1 and task.cause[i] == 0:
                out.append(Violation(i + 1, "event without cause label"))
    elif task.kind == MULTISTATE:
        out.extend(_validate_multistate(task))
    if task.n_events == 0:
        out.append(Violation(None, "at least one record with status = 1 is required"))
    return out


def _validate_multistate(task):
    out = []
    if task.from_state is None or not task.state_graph:
        return [Violation(None, "multi-state task requires start-stop records and a state graph")]
    edges = set(task.state_graph)
    for i in range(len(task)):
        if (task.from_state[i], task.to_state[i]) not in edges:
            out.append(Violation(i + 1, f"transition {task.from_state[i]}->{task.to_state[i]} "
                                        "is not an edge of the state graph"))
        if task.episode[i] < 1:
            out.append(Violation(i + 1, "episode must be >= 1"))
    groups = {}
    for i in range(len(task)):
        groups.setdefault((task.ids[i], task.from_state[i], task.to_state[i]), []).append(i)
    for rows in groups.values():
        rows = sorted(rows, key=lambda r: task.entry[r])
        for a, b in zip(rows, rows[1:]):
            if task.entry[b] < task.time[a]:
                out.append(Violation(b + 1, "overlapping windows for the same transition"))
    return out


def windows(task):
    """Collapse start-stop rows sharing (id, from, entry, exit) into one window.

    Returns ``(row, status)`` pairs; ``row`` is the transition row when one
    happened, else the first row of the window.
    """
    key_rows = {}
    for i in range(len(task)):
        key = (task.ids[i], task.from_state[i], float(task.entry[i]), float(task.time[i]))
        key_rows.setdefault(key, []).append(i)
    out = []
    for rows in key_rows.values():
        hits = [r for r in rows if task.status[r] == 1]
        if len(hits) > 1:
            raise DataError(f"subject {task.ids[rows[0]]}: several transitions out of one window")
        rep = hits[0] if hits else rows[0]
        out.append((rep, 1 if hits else 0))
    return out


def check(task):
    """Raise :class:`DataError` if ``task`` has violations; return it otherwise."""
    problems = validate(task)
    if problems:
        raise DataError("; ".join(str(p) for p in problems))
    return task


# CSV ------------------------------------------------------------------------

@dataclass(frozen=True)
class FormatSpec:
    """Column-role mapping for :func:`load_csv`.

    ``layout`` is ``"standard"``, ``"start-stop"`` or ``"auto"`` (start-stop
    when the header has both ``tstart`` and ``tstop`` columns).
    """

    layout: str = "auto"
    id: str = "id"
    time: str = "time"
    status: str = "status"
    cause: str = "cause"
    entry: str = "entry"
    from_state: str = "from"
    to_state: str = "to"
    episode: str = "episode"
    tstart: str = "tstart"
    tstop: str = "tstop"
    categorical: tuple[str, ...] = ()
    causes: tuple[str, ...] | None = None
    state_graph: tuple[tuple[str, str], ...] | None = None
    kind: str | None = None


def _parse_float(text, line, column):
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"line {line}: column {column!r} is not numeric: {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"line {line}: column {column!r} must be finite, got {text!r}")
    return v


def _parse_status(text, line, column):
    if text not in ("0", "1"):
        raise DataError(f"line {line}: status must be 0 or 1, got {text!r}")
    return int(text)


def _encode_features(header, rows, names, spec, first_line=2):
    cols = [header.index(nm) for nm in names]
    X = np.empty((len(rows), len(names)))
    features = []
    for k, (nm, c) in enumerate(zip(names, cols)):
        raw = [r[c].strip() for r in rows]
        for i, v in enumerate(raw):
            if v == "" or v.lower() in ("na", "nan"):
                raise DataError(f"line {i + first_line}: missing value in feature {nm!r}")
        categorical = nm in spec.categorical
        if not categorical:
            try:
                vals = [float(v) for v in raw]
            except ValueError:
                categorical = True
            else:
                if not all(math.isfinite(v) for v in vals):
                    raise DataError(f"feature {nm!r} has non-finite values")
                X[:, k] = vals
        if categorical:
            levels = list(dict.fromkeys(raw))
            index = {lv: j for j, lv in enumerate(levels)}
            X[:, k] = [index[v] for v in raw]
            features.append(Feature(nm, CATEGORICAL, tuple(levels)))
        else:
            features.append(Feature(nm))
    return X, tuple(features)


def load_csv(path, spec=None):
    """Read a survival task from a UTF-8 CSV file with a header row.

    Standard layout: ``id,time,status[,cause][,entry],<features...>``.
    Start-stop layout: ``id,from,to,episode,tstart,tstop,status,<features...>``.
    Every column not mapped to a role is a feature. Raises
    :class:`DataError` (with the offending line number) on malformed input
    and on any invariant violation of the resulting task.
    """
    spec = spec or FormatSpec()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]
    for ln, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise DataError(f"line {ln}: expected {len(header)} fields, got {len(r)}")

    layout = spec.layout
    if layout == "auto":
        layout = "start-stop" if spec.tstart in header and spec.tstop in header else "standard"
    if layout == "start-stop":
        task = _load_start_stop(header, rows, spec)
    elif layout == "standard":
        task = _load_standard(header, rows, spec)
    else:
        raise DataError(f"unknown layout {spec.layout!r}")
    return check(task)


def _require(header, names):
    missing = [nm for nm in names if nm not in header]
    if missing:
        raise DataError(f"missing required column(s): {', '.join(missing)}")


def _load_standard(header, rows, spec):
    _require(header, [spec.id, spec.time, spec.status])
    has_cause = spec.cause in header
    has_entry = spec.entry in header
    roles = {spec.id, spec.time, spec.status}
    roles |= {spec.cause} if has_cause else set()
    roles |= {spec.entry} if has_entry else set()
    names = [h for h in header if h not in roles]
    col = {h: j for j, h in enumerate(header)}
    n = len(rows)
    time = np.empty(n)
    entry = np.zeros(n)
    status = np.empty(n, np.int64)
    for i, r in enumerate(rows):
        ln = i + 2
        time[i] = _parse_float(r[col[spec.time]].strip(), ln, spec.time)
        status[i] = _parse_status(r[col[spec.status]].strip(), ln, spec.status)
        if has_entry:
            entry[i] = _parse_float(r[col[spec.entry]].strip(), ln, spec.entry)
        if not time[i] > entry[i]:
            raise DataError(f"line {ln}: time must exceed entry (exit <= entry)")
    codes = None
    labels: list[str] = list(spec.causes or [])
    if has_cause:
        codes = np.zeros(n, np.int64)
        for i, r in enumerate(rows):
            c = r[col[spec.cause]].strip()
            ln = i + 2
            if status[i] == 0:
                if c not in _NO_CAUSE:
                    raise DataError(f"line {ln}: cause {c!r} given for a censored row")
                continue
            if c in _NO_CAUSE:
                raise DataError(f"line {ln}: event row without cause label")
            if c not in labels:
                if spec.causes is not None:
                    raise DataError(f"line {ln}: unknown cause label {c!r}")
                labels.append(c)
            codes[i] = labels.index(c) + 1
    X, features = _encode_features(header, rows, names, spec)
    kind = spec.kind or (COMPETING if has_cause else SINGLE)
    ids = [r[col[spec.id]].strip() for r in rows]
    return SurvivalTask(kind=kind, ids=ids, time=time, status=status, X=X, features=features,
                        entry=entry, cause=codes, cause_labels=tuple(labels),
                        meta={"entry_column": has_entry})


def _load_start_stop(header, rows, spec):
    roles = [spec.id, spec.from_state, spec.to_state, spec.episode, spec.tstart, spec.tstop,
             spec.status]
    _require(header, roles)
    names = [h for h in header if h not in roles]
    col = {h: j for j, h in enumerate(header)}
    n = len(rows)
    entry, exit = np.empty(n), np.empty(n)
    status = np.empty(n, np.int64)
    episode = np.empty(n, np.int64)
    for i, r in enumerate(rows):
        ln = i + 2
        entry[i] = _parse_float(r[col[spec.tstart]].strip(), ln, spec.tstart)
        exit[i] = _parse_float(r[col[spec.tstop]].strip(), ln, spec.tstop)
        status[i] = _parse_status(r[col[spec.status]].strip(), ln, spec.status)
        ep = _parse_float(r[col[spec.episode]].strip(), ln, spec.episode)
        if ep != int(ep):
            raise DataError(f"line {ln}: episode must be an integer")
        episode[i] = int(ep)
        if not exit[i] > entry[i]:
            raise DataError(f"line {ln}: exit must exceed entry")
    fs = [r[col[spec.from_state]].strip() for r in rows]
    ts = [r[col[spec.to_state]].strip() for r in rows]
    graph = spec.state_graph
    if graph is None:
        graph = tuple(dict.fromkeys(zip(fs, ts)))
    X, features = _encode_features(header, rows, names, spec)
    ids = [r[col[spec.id]].strip() for r in rows]
    return SurvivalTask(kind=MULTISTATE, ids=ids, time=exit, status=status, X=X,
                        features=features, entry=entry, from_state=fs, to_state=ts,
                        episode=episode, state_graph=tuple(graph))


def fmt_float(x):
    return format(float(x), ".12g")


def export_csv(task, path, include_entry=None):
    """Write ``task`` in the layout :func:`load_csv` reads.

    ``include_entry=None`` writes the entry column when the task was loaded
    with one or has a non-zero entry time.
    """
    if include_entry is None:
        include_entry = bool(task.meta.get("entry_column")) or bool(np.any(task.entry > 0))
    fnames = task.feature_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if task.kind == MULTISTATE:
            w.writerow(["id", "from", "to", "episode", "tstart", "tstop", "status", *fnames])
            for i in range(len(task)):
                w.writerow([task.ids[i], task.from_state[i], task.to_state[i],
                            int(task.episode[i]), fmt_float(task.entry[i]),
                            fmt_float(task.time[i]), int(task.status[i]),
                            *_feature_cells(task, i)])
            return
        head = ["id", "time", "status"]
        if task.kind == COMPETING:
            head.append("cause")
        if include_entry:
            head.append("entry")
        w.writerow(head + fnames)
        for i in range(len(task)):
            row = [task.ids[i], fmt_float(task.time[i]), int(task.status[i])]
            if task.kind == COMPETING:
                row.append(task.cause_labels[task.cause[i] - 1] if task.cause[i] > 0 else "")
            if include_entry:
                row.append(fmt_float(task.entry[i]))
            w.writerow(row + _feature_cells(task, i))


def _feature_cells(task, i):
    out = []
    for k, f in enumerate(task.features):
        v = task.X[i, k]
        out.append(f.levels[int(v)] if f.kind == CATEGORICAL else fmt_float(v))
    return out
