"""Built-in learners and the small contract the reductions rely on.

A learner is described by a :class:`LearnerSpec` (``glm`` or ``gbt`` plus
hyperparameters). :func:`fit_learner` fits it for a given family/loss and
returns an object with ``predict_link(X)`` (no offset), ``predict(X)``
and ``to_dict()``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .design import DesignMatrix, DesignSpec, Frame, FormulaSpec, SchemaError, SchemaWarning
from .gbt import GbtError, GbtFit, GbtParams, fit_gbt
from .glm import GlmError, GlmFit, fit_glm, inverse_link

_GBT_LOSS = {"poisson": "poisson", "binomial": "logistic", "gaussian": "squared"}


@dataclass(frozen=True)
class LearnerSpec:
    name: str = "glm"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in ("glm", "gbt"):
            raise ValueError(f"unknown learner {self.name!r}")
        if self.name == "glm":
            unknown = set(self.params) - {"lam", "max_iter"}
            if unknown:
                raise ValueError(f"unknown GLM parameters: {sorted(unknown)}")
        else:
            GbtParams.from_dict(dict(self.params))

    @classmethod
    def parse(cls, value):
        """Accept a spec, a name, or ``name:key=value,key=value``."""
        if isinstance(value, LearnerSpec):
            return value
        if isinstance(value, dict):
            return cls(value.get("name", "glm"), dict(value.get("params", {})))
        name, _, rest = str(value).partition(":")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            k, _, v = item.partition("=")
            params[k.strip()] = _number(v.strip())
        return cls(name.strip(), params)

    def with_params(self, **params):
        merged = dict(self.params)
        merged.update(params)
        return LearnerSpec(self.name, merged)

    def to_dict(self):
        return {"name": self.name, "params": dict(self.params)}

    def __str__(self):
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(f"{k}={v}" for k, v in self.params.items())


def _number(text):
    if text.lower() in ("none", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def fit_learner(spec, X, y, offset=None, weights=None, family="gaussian", valid=None):
    """Fit ``spec`` with GLM ``family`` (poisson/binomial/gaussian) semantics."""
    spec = LearnerSpec.parse(spec)
    if spec.name == "glm":
        return fit_glm(X, y, offset, weights, family, lam=float(spec.params.get("lam", 0.0)),
                       max_iter=int(spec.params.get("max_iter", 100)))
    params = GbtParams.from_dict(dict(spec.params))
    return fit_gbt(X, y, offset, weights, _GBT_LOSS[family], params,
                   valid if params.early_stop_rounds else None)


def load_learner(d):
    if d["type"] == "glm":
        return GlmFit.from_dict(d)
    if d["type"] == "gbt":
        return GbtFit.from_dict(d)
    raise ValueError(f"unknown learner type {d['type']!r}")


__all__ = ["DesignMatrix", "DesignSpec", "Frame", "FormulaSpec", "SchemaError", "SchemaWarning",
           "GbtError", "GbtFit", "GbtParams", "fit_gbt", "GlmError", "GlmFit", "fit_glm",
           "inverse_link", "LearnerSpec", "fit_learner", "load_learner"]
