"""Column frames, formulas and design matrices."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class SchemaWarning(UserWarning):
    pass


class SchemaError(ValueError):
    pass


class Frame:
    """Named columns of equal length.

    Categorical columns hold integer codes into ``levels[name]``; every
    other column is float.
    """

    def __init__(self, columns, levels=None, n=None):
        self.levels = {k: tuple(str(v) for v in lv) for k, lv in (levels or {}).items()}
        self.columns = {}
        for name, col in columns.items():
            col = np.asarray(col, dtype=np.int64 if name in self.levels else float)
            if col.ndim != 1:
                raise SchemaError(f"column {name!r} must be one-dimensional")
            if n is not None and len(col) != n:
                raise SchemaError(f"column {name!r} has {len(col)} rows, expected {n}")
            n = len(col)
            self.columns[name] = col
        self.n = 0 if n is None else n

    def __len__(self):
        return self.n

    def __contains__(self, name):
        return name in self.columns

    def __getitem__(self, name):
        return self.columns[name]

    @property
    def names(self):
        return list(self.columns)

    def is_categorical(self, name):
        return name in self.levels

    def labels(self, name):
        """Level labels of a categorical column, row by row."""
        return np.asarray(self.levels[name], dtype=object)[self.columns[name]]

    def with_columns(self, columns, levels=None):
        cols = dict(self.columns)
        cols.update(columns)
        lv = dict(self.levels)
        lv.update(levels or {})
        return Frame(cols, lv)

    def take(self, rows):
        n = len(np.arange(self.n)[rows])
        return Frame({k: v[rows] for k, v in self.columns.items()}, self.levels, n=n)

    def repeat(self, counts):
        n = len(np.repeat(np.arange(self.n), counts))
        return Frame({k: np.repeat(v, counts) for k, v in self.columns.items()}, self.levels, n=n)


@dataclass(frozen=True)
class FormulaSpec:
    """Additive terms, each a tuple of column names (length > 1 = interaction).

    ``parse`` understands ``a + b``, ``a:b``, ``a*b`` (= ``a + b + a:b``)
    and ``.`` for "every base feature". An intercept is always fitted by
    the learners and is not part of the design.
    """

    terms: tuple[tuple[str, ...], ...] = ()
    dot: bool = False

    @classmethod
    def parse(cls, text):
        if isinstance(text, FormulaSpec):
            return text
        terms, dot = [], False
        for raw in str(text).split("+"):
            raw = raw.strip()
            if not raw or raw == "1":
                continue
            if raw == ".":
                dot = True
                continue
            if "*" in raw:
                parts = [p.strip() for p in raw.split("*")]
                for size in range(1, len(parts) + 1):
                    for combo in _combinations(parts, size):
                        terms.append(tuple(combo))
                continue
            terms.append(tuple(p.strip() for p in raw.split(":")))
        for t in terms:
            if any(not p for p in t):
                raise ValueError(f"malformed formula {text!r}")
        return cls(tuple(dict.fromkeys(terms)), dot)

    def expand(self, base_features):
        """Concrete term list with ``.`` replaced by ``base_features``.

        Inside an interaction ``.`` stands for each base feature in turn, so
        ``.:a_end`` gives one ``x:a_end`` term per feature.
        """
        terms = [(f,) for f in base_features] if self.dot else []
        for t in self.terms:
            if "." in t:
                k = t.index(".")
                new = [t[:k] + (f,) + t[k + 1:] for f in base_features]
            else:
                new = [t]
            terms += [u for u in new if u not in terms]
        return tuple(terms)

    def __str__(self):
        parts = ["."] if self.dot else []
        parts += [":".join(t) for t in self.terms]
        return " + ".join(parts) if parts else "1"


def _combinations(items, size):
    if size == 0:
        yield ()
        return
    for i, it in enumerate(items):
        for rest in _combinations(items[i + 1:], size - 1):
            yield (it,) + rest


@dataclass(eq=False)
class DesignMatrix:
    values: np.ndarray
    names: tuple[str, ...]
    unknown_levels: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise SchemaError("design matrix contains non-finite values")

    @property
    def shape(self):
        return self.values.shape


@dataclass
class DesignSpec:
    """Encoding state learned on training data and reused at predict time.

    Categoricals are one-hot encoded with the first level dropped; unseen
    levels map to the reference level with a :class:`SchemaWarning`.
    """

    terms: tuple[tuple[str, ...], ...]
    levels: dict = field(default_factory=dict)
    names: tuple[str, ...] = ()

    @classmethod
    def fit(cls, frame, formula, base_features=()):
        formula = FormulaSpec.parse(formula)
        terms = formula.expand(base_features)
        levels = {}
        for t in terms:
            for name in t:
                if name not in frame:
                    raise SchemaError(f"formula refers to unknown column {name!r}")
                if frame.is_categorical(name):
                    levels[name] = frame.levels[name]
        spec = cls(terms, levels)
        spec.names = tuple(spec._column_names())
        return spec

    def _pieces(self, name):
        if name in self.levels:
            return [f"{name}[{lv}]" for lv in self.levels[name][1:]]
        return [name]

    def _column_names(self):
        for t in self.terms:
            combos = [[]]
            for name in t:
                combos = [c + [p] for c in combos for p in self._pieces(name)]
            for c in combos:
                yield ":".join(c)

    def _encode(self, frame, name, counter):
        if name not in frame:
            raise SchemaError(f"missing column {name!r}")
        if name not in self.levels:
            if frame.is_categorical(name):
                raise SchemaError(f"column {name!r} was numeric at fit time")
            return [frame[name]]
        if not frame.is_categorical(name):
            raise SchemaError(f"column {name!r} was categorical at fit time")
        fitted = self.levels[name]
        if frame.levels[name] == fitted:
            codes = frame[name]
        else:
            index = {lv: k for k, lv in enumerate(fitted)}
            remap = np.array([index.get(lv, -1) for lv in frame.levels[name]], dtype=np.int64)
            codes = remap[frame[name]] if len(remap) else frame[name]
            unknown = codes < 0
            if unknown.any():
                counter[0] += int(unknown.sum())
                codes = np.where(unknown, 0, codes)
        return [(codes == k).astype(float) for k in range(1, len(fitted))]

    def transform(self, frame):
        counter = [0]
        cache = {}
        cols = []
        for t in self.terms:
            combos = [np.ones(len(frame))]
            for name in t:
                if name not in cache:
                    cache[name] = self._encode(frame, name, counter)
                combos = [c * p for c in combos for p in cache[name]]
            cols.extend(combos)
        if counter[0]:
            warnings.warn(f"{counter[0]} unseen categorical values mapped to the reference level",
                          SchemaWarning, stacklevel=2)
        values = np.column_stack(cols) if cols else np.zeros((len(frame), 0))
        return DesignMatrix(values, self.names, counter[0])

    def to_dict(self):
        return {"terms": [list(t) for t in self.terms],
                "levels": {k: list(v) for k, v in self.levels.items()},
                "names": list(self.names)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(tuple(t) for t in d["terms"]),
                   {k: tuple(v) for k, v in d["levels"].items()}, tuple(d["names"]))
