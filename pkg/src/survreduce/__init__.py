"""Survival analysis by reduction to standard regression and classification.

Distributional reductions (:func:`pem_fit`, :func:`dt_fit`) expand the data
into one row per subject and time interval and map the fitted hazards back
to survival, cumulative incidence and transition probabilities. Point
reductions (:func:`ipcw_fit`, :func:`crm_fit`, :func:`pv_fit`) turn the
censored outcome into a single regression target.
"""
from ._accel import backend, set_backend, using_backend
from .harness import ResamplingPlan, ScoreTable, benchmark, grouped_cv
from .data import DataError, FormatSpec, SurvivalTask, export_csv, load_csv
from .estimators import (StepFunction, aalen_johansen, censoring_km, kaplan_meier,
                         nelson_aalen)
from .learners import LearnerSpec, fit_learner
from .metrics import harrell_c, isbs
from .partition import CutGrid, CutStrategy, LongData, expand, make_cuts
from .reduce_dist import (FittedReduction, SurvivalCurveSet, dt_fit, load_model, pem_fit,
                          save_model)
from .reduce_point import (crm_fit, crm_targets, ipcw_fit, ipcw_transform, pseudo_values,
                           pv_fit)
from .simulate import simulate

__version__ = "0.1.0"

__all__ = [
    "backend", "set_backend", "using_backend",
    "ResamplingPlan", "ScoreTable", "benchmark", "grouped_cv",
    "DataError", "FormatSpec", "SurvivalTask", "export_csv", "load_csv",
    "StepFunction", "aalen_johansen", "censoring_km", "kaplan_meier", "nelson_aalen",
    "LearnerSpec", "fit_learner", "harrell_c", "isbs",
    "CutGrid", "CutStrategy", "LongData", "expand", "make_cuts",
    "FittedReduction", "SurvivalCurveSet", "dt_fit", "load_model", "pem_fit", "save_model",
    "crm_fit", "crm_targets", "ipcw_fit", "ipcw_transform", "pseudo_values", "pv_fit",
    "simulate",
]
