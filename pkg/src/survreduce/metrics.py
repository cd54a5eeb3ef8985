"""Harrell's C and the integrated survival Brier score."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


def harrell_c(risk, times, status):
    """Harrell's concordance index; higher risk should mean earlier events.

    Comparable pairs have ``t_i < t_j`` with ``d_i = 1``; tied risks count one
    half and pairs with equal times are skipped. Returns 0.5 when nothing is
    comparable.
    """
    risk = np.asarray(risk, dtype=float)
    times = np.asarray(times, dtype=float)
    status = np.asarray(status)
    if not (len(risk) == len(times) == len(status)):
        raise ValueError("risk, times and status must have equal length")
    conc, comp = kernels.harrell_counts(risk, times, status)
    return 0.5 if comp == 0 else conc / comp


def type1_quantile(values, p):
    v = np.sort(np.asarray(values, dtype=float))
    k = int(np.ceil(p * len(v) - 1e-12)) - 1
    return float(v[min(max(k, 0), len(v) - 1)])


def default_tau_max(train_times):
    """80th percentile (type-1) of the training times."""
    return type1_quantile(train_times, 0.8)


def _survival_matrix(curves, grid, n):
    """Survival of each test subject on ``grid`` as ``(n, len(grid))``."""
    if hasattr(curves, "evaluate"):
        S = curves.evaluate(grid)
    elif callable(curves):
        S = np.broadcast_to(np.asarray(curves(grid), dtype=float), (n, len(grid)))
    else:
        S = np.array([np.asarray(c(grid), dtype=float) for c in curves])
    if S.shape != (n, len(grid)):
        raise ValueError(f"curves give shape {S.shape}, expected {(n, len(grid))}")
    return S


def _curve_knots(curves):
    if hasattr(curves, "cuts"):
        return np.asarray(curves.cuts)
    if hasattr(curves, "knots"):
        return np.asarray(curves.knots)
    return np.zeros(0)


@dataclass
class BrierCurve:
    grid: np.ndarray
    scores: np.ndarray
    dropped: int
    tau_max: float

    @property
    def integrated(self):
        return float(np.trapezoid(self.scores, self.grid) / self.tau_max)


def brier_curve(curves, times, status, G, tau_max):
    """Graf-weighted Brier score on ``{0} U knots U observed times U {tau_max}``
    (all ``<= tau_max``).

    Events before ``t`` are weighted by ``1 / G(t_i-)`` and subjects still at
    risk by ``1 / G(t)``. Terms with a zero censoring survival are dropped and
    the average is taken over the remaining subjects.
    """
    times = np.asarray(times, dtype=float)
    status = np.asarray(status)
    tau_max = float(tau_max)
    if tau_max <= 0:
        raise ValueError("tau_max must be positive")
    n = len(times)
    pts = np.concatenate([[0.0, tau_max], _curve_knots(curves), times])
    grid = np.unique(pts[pts <= tau_max])
    S = _survival_matrix(curves, grid, n)
    g_event = G.left_limit(times)
    g_grid = G(grid)
    event_before = (times[:, None] <= grid[None, :]) & (status[:, None] == 1)
    alive = times[:, None] > grid[None, :]
    w_event = np.where(g_event > 0, 1.0 / np.where(g_event > 0, g_event, 1.0), 0.0)
    w_alive = np.where(g_grid > 0, 1.0 / np.where(g_grid > 0, g_grid, 1.0), 0.0)
    drop = (event_before & (g_event[:, None] <= 0)) | (alive & (g_grid[None, :] <= 0))
    terms = (S ** 2 * event_before * w_event[:, None]
             + (1.0 - S) ** 2 * alive * w_alive[None, :])
    kept = n - drop.sum(axis=0)
    scores = np.where(kept > 0, np.where(drop, 0.0, terms).sum(axis=0) / np.maximum(kept, 1), 0.0)
    return BrierCurve(grid, scores, int(drop.sum()), tau_max)


def isbs(curves, times, status, G, tau_max):
    """Integrated survival Brier score ``(1 / tau_max) int_0^tau_max BS(t) dt``
    by the trapezoid rule. ``G`` must come from the training data."""
    return brier_curve(curves, times, status, G, tau_max).integrated
