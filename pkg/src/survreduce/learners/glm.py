"""Generalised linear models fitted by iteratively reweighted least squares."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, xlogy

POISSON = "poisson"
BINOMIAL = "binomial"
GAUSSIAN = "gaussian"
FAMILIES = (POISSON, BINOMIAL, GAUSSIAN)
_ALIASES = {"poisson-log": POISSON, "binomial-logit": BINOMIAL, "logistic": BINOMIAL,
            "gaussian-identity": GAUSSIAN, "squared": GAUSSIAN}

_ETA_MAX = 700.0


class GlmError(ArithmeticError):
    """IRLS failure. ``coef`` holds the last iterate, ``diagnostic`` says why."""

    def __init__(self, message, coef=None, diagnostic=None):
        super().__init__(message)
        self.coef = coef
        self.diagnostic = diagnostic or message


def family_name(family):
    family = _ALIASES.get(family, family)
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    return family


def inverse_link(family, eta):
    family = family_name(family)
    if family == POISSON:
        return np.exp(np.minimum(eta, _ETA_MAX))
    if family == BINOMIAL:
        return expit(eta)
    return np.asarray(eta, dtype=float)


def deviance(family, y, mu, w):
    family = family_name(family)
    if family == POISSON:
        return 2.0 * np.sum(w * (xlogy(y, y) - xlogy(y, mu) - (y - mu)))
    if family == BINOMIAL:
        return 2.0 * np.sum(w * (xlogy(y, y) - xlogy(y, mu)
                                 + xlogy(1 - y, 1 - y) - xlogy(1 - y, 1 - mu)))
    return np.sum(w * (y - mu) ** 2)


@dataclass(eq=False)
class GlmFit:
    family: str
    coef: np.ndarray
    lam: float = 0.0
    names: tuple = ()
    n_iter: int = 0
    deviance: float = float("nan")
    deviance_path: list = field(default_factory=list)

    @property
    def intercept(self):
        return float(self.coef[0])

    def predict_link(self, X):
        """Linear predictor without any offset."""
        X = _values(X)
        if X.shape[1] != len(self.coef) - 1:
            raise ValueError(f"expected {len(self.coef) - 1} design columns, got {X.shape[1]}")
        return self.coef[0] + X @ self.coef[1:]

    def predict(self, X):
        return inverse_link(self.family, self.predict_link(X))

    def to_dict(self):
        return {"type": "glm", "family": self.family, "coef": self.coef.tolist(),
                "lam": self.lam, "names": list(self.names), "n_iter": self.n_iter,
                "deviance": self.deviance}

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], np.array(d["coef"], dtype=float), d["lam"], tuple(d["names"]),
                   d["n_iter"], d["deviance"])


def _values(X):
    X = getattr(X, "values", X)
    X = np.asarray(X, dtype=float)
    return X.reshape(len(X), -1) if X.ndim != 2 else X


def _check_response(family, y, w):
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    if not np.all(np.isfinite(y)):
        raise ValueError("response must be finite")
    if family == POISSON and np.any(y < 0):
        raise ValueError("poisson response must be non-negative")
    if family == BINOMIAL and np.any((y < 0) | (y > 1)):
        raise ValueError("binomial response must lie in [0, 1]")


def _working(family, eta, mu, y):
    """Working weights (before prior weights) and working residual."""
    if family == POISSON:
        return mu, (y - mu) / mu
    if family == BINOMIAL:
        v = mu * (1.0 - mu)
        return v, (y - mu) / v
    return np.ones_like(mu), y - mu


def fit_glm(X, y, offset=None, weights=None, family=POISSON, lam=0.0, max_iter=100,
            tol=1e-10):
    """Ridge-penalised GLM by IRLS.

    Each step solves the penalised weighted least-squares problem through a
    QR-based least-squares solve on ``sqrt(W) X`` stacked with
    ``sqrt(lam)`` rows for the non-intercept coefficients. Convergence is
    declared when the relative change of the penalised deviance drops below
    ``tol`` and no fitted rate (poisson, per unit exposure) or probability
    (binomial) moved by more than ``tol`` relative; the second condition
    matters for cells drifting to a zero estimate, whose deviance share
    vanishes long before their rate does. Step halving keeps the deviance
    from increasing.
    """
    family = family_name(family)
    names = tuple(getattr(X, "names", ()))
    Xv = _values(X)
    n, p = Xv.shape
    y = np.asarray(y, dtype=float)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    if len(y) != n or len(w) != n or len(off) != n:
        raise ValueError("X, y, offset and weights must have the same number of rows")
    if not np.all(np.isfinite(off)):
        raise ValueError("offset must be finite")
    if lam < 0:
        raise ValueError("ridge penalty must be non-negative")
    _check_response(family, y, w)
    if not np.any(w > 0):
        raise GlmError("all observation weights are zero")

    X1 = np.column_stack([np.ones(n), Xv])
    pen = np.sqrt(lam) * np.eye(p + 1)[1:] if lam > 0 else np.zeros((0, p + 1))
    if lam == 0:
        rank = np.linalg.matrix_rank(X1[w > 0])
        if rank < p + 1:
            raise GlmError(f"design matrix is rank deficient ({rank} < {p + 1}); "
                           "use a ridge penalty lam > 0")

    if family == POISSON:
        mu = y + 0.1
        eta = np.log(mu)
    elif family == BINOMIAL:
        mu = (w * y + 0.5) / (w + 1.0)
        eta = np.log(mu / (1 - mu))
    else:
        mu = y.copy()
        eta = y.copy()

    def pdev(beta):
        e = off + X1 @ beta
        m = inverse_link(family, e)
        return deviance(family, y, m, w) + lam * np.sum(beta[1:] ** 2), e, m

    beta = None
    rate_old = None
    dev_old = np.inf
    path = []
    for it in range(1, max_iter + 1):
        wz, resid = _working(family, eta, mu, y)
        W = w * wz
        z = eta - off + resid
        sw = np.sqrt(W)
        A = np.vstack([sw[:, None] * X1, pen])
        b = np.concatenate([sw * z, np.zeros(len(pen))])
        new, *_ = np.linalg.lstsq(A, b, rcond=None)
        if not np.all(np.isfinite(new)):
            raise GlmError("non-finite coefficients in IRLS step", beta, "least-squares step")
        dev, e, m = pdev(new)
        halvings = 0
        while beta is not None and not (np.isfinite(dev) and dev <= dev_old * (1 + 1e-12) + 1e-300):
            halvings += 1
            if halvings > 40:
                raise GlmError("step halving failed to reduce the deviance", beta,
                               f"iteration {it}")
            new = 0.5 * (new + beta)
            dev, e, m = pdev(new)
        if not np.isfinite(dev):
            raise GlmError("non-finite deviance", new, f"iteration {it}")
        beta, eta, mu = new, e, m
        path.append(float(dev))
        # fitted rate per unit exposure (poisson) or probability (binomial)
        rate = mu * np.exp(-off) if family == POISSON else mu
        stable = rate_old is not None and np.all(np.abs(rate - rate_old) <= tol * (1 + np.abs(rate)))
        if family == GAUSSIAN or (abs(dev - dev_old) / (abs(dev) + 0.1) < tol and stable):
            return GlmFit(family, beta, float(lam), names, it, float(dev), path)
        rate_old = rate
        if family == BINOMIAL:
            mu = np.clip(mu, 1e-300, 1 - 1e-16)
        elif family == POISSON:
            mu = np.maximum(mu, 1e-300)
        dev_old = dev
    raise GlmError(f"IRLS did not converge in {max_iter} iterations (possible separation)",
                   beta, f"last relative deviance change above {tol}")


def score(fit, X, y, offset=None, weights=None):
    """Gradient of the penalised log-likelihood at ``fit.coef`` (canonical links)."""
    Xv = _values(X)
    n = len(Xv)
    X1 = np.column_stack([np.ones(n), Xv])
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    mu = inverse_link(fit.family, off + X1 @ fit.coef)
    g = X1.T @ (w * (np.asarray(y, dtype=float) - mu))
    g[1:] -= fit.lam * fit.coef[1:]
    return g
