"""Newton gradient boosting with depth-limited regression trees.

Trees are grown level by level with an exact greedy split search (see
:func:`survreduce.kernels.best_splits`). Leaves hold
``-learning_rate * G / (H + reg_lambda)`` on the link scale.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import expit

from .. import kernels

LOSSES = ("poisson", "logistic", "squared")
_ALIASES = {"binomial": "logistic", "gaussian": "squared"}


class GbtError(ArithmeticError):
    pass


@dataclass
class GbtParams:
    learning_rate: float = 0.1
    max_depth: int = 3
    min_leaf: int = 20
    reg_lambda: float = 1.0
    gamma: float = 0.0
    nrounds: int = 200
    early_stop_rounds: int | None = None

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown GBT parameters: {sorted(unknown)}")
        out = cls(**d)
        if not 0 <= out.learning_rate <= 1:
            raise ValueError("learning_rate must lie in [0, 1]")
        if out.max_depth < 1 or out.nrounds < 0 or out.min_leaf < 1:
            raise ValueError("max_depth and min_leaf must be >= 1, nrounds >= 0")
        return out


def loss_name(loss):
    loss = _ALIASES.get(loss, loss)
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}")
    return loss


def _grad_hess(loss, raw, y, w):
    if loss == "poisson":
        mu = np.exp(raw)
        return w * (mu - y), w * mu
    if loss == "logistic":
        p = expit(raw)
        return w * (p - y), w * p * (1 - p)
    return w * (raw - y), w.copy()


def loss_value(loss, raw, y, w):
    """Mean weighted negative log-likelihood (up to constants) on the link scale."""
    if loss == "poisson":
        v = np.exp(raw) - y * raw
    elif loss == "logistic":
        v = np.logaddexp(0.0, raw) - y * raw
    else:
        v = 0.5 * (raw - y) ** 2
    sw = w.sum()
    return float((w * v).sum() / sw) if sw > 0 else float("nan")


def _base_score(loss, y, off, w):
    if loss == "poisson":
        rate = (w * y).sum() / (w * np.exp(off)).sum()
        return float(np.log(max(rate, 1e-12)))
    if loss == "logistic":
        p = float(np.clip((w * y).sum() / w.sum(), 1e-12, 1 - 1e-12))
        return float(np.log(p / (1 - p)))
    return float((w * (y - off)).sum() / w.sum())


@dataclass(eq=False)
class GbtFit:
    loss: str
    base_score: float
    params: GbtParams
    feature: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    threshold: np.ndarray = field(default_factory=lambda: np.zeros(0))
    left: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    right: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    value: np.ndarray = field(default_factory=lambda: np.zeros(0))
    roots: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    best_iteration: int = 0
    train_loss: list = field(default_factory=list)
    valid_loss: list = field(default_factory=list)
    names: tuple = ()
    n_features: int = 0

    @property
    def n_trees(self):
        return len(self.roots)

    def tree_depth(self, t):
        end = self.roots[t + 1] if t + 1 < self.n_trees else len(self.feature)
        depth = {int(self.roots[t]): 0}
        for k in range(int(self.roots[t]), int(end)):
            if self.feature[k] >= 0:
                depth[int(self.left[k])] = depth[int(self.right[k])] = depth[k] + 1
        return max(depth.values())

    def predict_link(self, X, n_trees=None):
        """Link-scale prediction without offset using the first ``best_iteration``
        trees (or ``n_trees``)."""
        X = np.asarray(getattr(X, "values", X), dtype=float)
        X = X.reshape(len(X), -1)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} design columns, got {X.shape[1]}")
        k = self.best_iteration if n_trees is None else n_trees
        if k == 0 or len(X) == 0:
            return np.full(len(X), self.base_score)
        return self.base_score + kernels.tree_predict(X, self.feature, self.threshold, self.left,
                                                      self.right, self.value, self.roots, k)

    def predict(self, X):
        eta = self.predict_link(X)
        if self.loss == "poisson":
            return np.exp(eta)
        if self.loss == "logistic":
            return expit(eta)
        return eta

    def to_dict(self):
        return {"type": "gbt", "loss": self.loss, "base_score": self.base_score,
                "params": asdict(self.params), "feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(), "left": self.left.tolist(),
                "right": self.right.tolist(), "value": self.value.tolist(),
                "roots": self.roots.tolist(), "best_iteration": self.best_iteration,
                "train_loss": list(self.train_loss), "valid_loss": list(self.valid_loss),
                "names": list(self.names), "n_features": self.n_features}

    @classmethod
    def from_dict(cls, d):
        return cls(d["loss"], d["base_score"], GbtParams(**d["params"]),
                   np.array(d["feature"], np.int64), np.array(d["threshold"], float),
                   np.array(d["left"], np.int64), np.array(d["right"], np.int64),
                   np.array(d["value"], float), np.array(d["roots"], np.int64),
                   d["best_iteration"], d["train_loss"], d["valid_loss"], tuple(d["names"]),
                   d["n_features"])


def _grow_tree(X, order, g, h, params, nodes):
    """Append one tree to ``nodes`` (lists of feature/threshold/left/right/value);
    return each row's leaf id."""
    feature, threshold, left, right, value = nodes
    n = len(g)
    root = len(feature)
    for lst, v in zip(nodes, (-1, 0.0, -1, -1, 0.0)):
        lst.append(v)
    level_ids = [root]
    row_level = np.zeros(n, np.int64)
    leaf_of_row = np.full(n, root, np.int64)
    for _ in range(params.max_depth):
        gain, col, thr = kernels.best_splits(X, order, g, h, row_level, len(level_ids),
                                             params.reg_lambda, params.min_leaf, params.gamma)
        next_ids, remap = [], np.full(len(level_ids), -1, np.int64)
        for k, node_id in enumerate(level_ids):
            if col[k] < 0:
                continue
            feature[node_id] = int(col[k])
            threshold[node_id] = float(thr[k])
            for side in (left, right):
                side[node_id] = len(feature)
                for lst, v in zip(nodes, (-1, 0.0, -1, -1, 0.0)):
                    lst.append(v)
            remap[k] = len(next_ids)
            next_ids += [left[node_id], right[node_id]]
        if not next_ids:
            break
        active = row_level >= 0
        parent = np.where(active, remap[np.maximum(row_level, 0)], -1)
        split_rows = parent >= 0
        c = col[row_level[split_rows]]
        go_right = X[np.flatnonzero(split_rows), c] > thr[row_level[split_rows]]
        new_level = np.full(n, -1, np.int64)
        new_level[split_rows] = parent[split_rows] + go_right
        ids = np.asarray(next_ids, np.int64)
        leaf_of_row[split_rows] = ids[new_level[split_rows]]
        row_level = new_level
        level_ids = next_ids
    # leaf values from row-order sums
    leaves = np.unique(leaf_of_row)
    G = np.bincount(leaf_of_row, weights=g, minlength=len(feature))
    H = np.bincount(leaf_of_row, weights=h, minlength=len(feature))
    for leaf in leaves:
        value[leaf] = float(-params.learning_rate * G[leaf] / (H[leaf] + params.reg_lambda))
    return leaf_of_row


def fit_gbt(X, y, offset=None, weights=None, loss="squared", params=None, valid=None):
    """Boost trees on the link scale (log for poisson, logit for logistic).

    ``valid`` is an optional ``(X, y, offset, weights)`` holdout; with
    ``params.early_stop_rounds`` set, boosting stops after that many rounds
    without improvement and ``best_iteration`` is the argmin of the
    validation loss. Without a holdout every tree is used.
    """
    loss = loss_name(loss)
    params = params if isinstance(params, GbtParams) else GbtParams.from_dict(params or {})
    names = tuple(getattr(X, "names", ()))
    Xv = np.asarray(getattr(X, "values", X), dtype=float)
    n = len(Xv)
    Xv = Xv.reshape(n, -1)
    y = np.asarray(y, dtype=float)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    if not (np.all(np.isfinite(Xv)) and np.all(np.isfinite(y)) and np.all(np.isfinite(off))):
        raise ValueError("non-finite inputs")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative with positive total")
    if loss == "poisson" and np.any(y < 0):
        raise ValueError("poisson response must be non-negative")
    if loss == "logistic" and np.any((y < 0) | (y > 1)):
        raise ValueError("logistic response must lie in [0, 1]")
    if params.early_stop_rounds and valid is None:
        raise GbtError("early stopping requested without a holdout set")
    if valid is not None:
        Xh, yh, oh, wh = valid
        Xh = np.asarray(getattr(Xh, "values", Xh), dtype=float).reshape(len(yh), -1)
        yh = np.asarray(yh, dtype=float)
        oh = np.zeros(len(yh)) if oh is None else np.asarray(oh, dtype=float)
        wh = np.ones(len(yh)) if wh is None else np.asarray(wh, dtype=float)
        if len(yh) == 0 or wh.sum() <= 0:
            raise GbtError("empty holdout set")

    base = _base_score(loss, y, off, w)
    fit = GbtFit(loss, base, params, names=names, n_features=Xv.shape[1])
    F = np.full(n, base)
    Fh = np.full(len(yh), base) if valid is not None else None
    order = np.argsort(Xv, axis=0, kind="stable").T.copy()
    nodes = ([], [], [], [], [])
    roots = []
    fit.train_loss.append(loss_value(loss, F + off, y, w))
    if valid is not None:
        fit.valid_loss.append(loss_value(loss, Fh + oh, yh, wh))
    best, since_best = 0, 0
    for rnd in range(params.nrounds):
        g, h = _grad_hess(loss, F + off, y, w)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
            raise GbtError(f"non-finite gradient in round {rnd + 1}")
        roots.append(len(nodes[0]))
        leaf = _grow_tree(Xv, order, g, h, params, nodes)
        vals = np.asarray(nodes[4])
        F = F + vals[leaf]
        fit.train_loss.append(loss_value(loss, F + off, y, w))
        if valid is not None:
            Fh = Fh + kernels.tree_predict(Xh, np.asarray(nodes[0]), np.asarray(nodes[1]),
                                           np.asarray(nodes[2]), np.asarray(nodes[3]), vals,
                                           np.asarray([roots[-1]]), 1)
            fit.valid_loss.append(loss_value(loss, Fh + oh, yh, wh))
            if fit.valid_loss[-1] < fit.valid_loss[best]:
                best, since_best = rnd + 1, 0
            else:
                since_best += 1
                if params.early_stop_rounds and since_best >= params.early_stop_rounds:
                    break
    fit.feature = np.asarray(nodes[0], np.int64)
    fit.threshold = np.asarray(nodes[1], float)
    fit.left = np.asarray(nodes[2], np.int64)
    fit.right = np.asarray(nodes[3], np.int64)
    fit.value = np.asarray(nodes[4], float)
    fit.roots = np.asarray(roots, np.int64)
    fit.best_iteration = best if valid is not None else len(roots)
    if not np.all(np.isfinite(fit.value)):
        raise GbtError("non-finite leaf values")
    return fit
