"""Command-line interface.

    survreduce [--config FILE] COMMAND [options]

Commands: transform, simulate, fit, predict, evaluate, benchmark. Options
can also come from an INI file: keys in ``[survreduce]`` apply to every
command, keys in a section named after the command apply to that command,
and flags given on the command line win over both.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import harness as bench
from .data import DataError, FormatSpec, export_csv, fmt_float, load_csv
from .estimators import censoring_km
from .learners import SchemaError
from .metrics import default_tau_max, harrell_c, isbs
from .partition import expand, make_cuts
from .reduce_dist import (DT, PEM, FittedReduction, dt_fit, dt_risk_rows, load_model, pem_fit,
                          save_model)
from .reduce_point import (IdentifiabilityError, PointFit, crm_fit, crm_targets, ipcw_fit,
                           ipcw_transform, pseudo_values, pv_fit)
from .simulate import SCENARIOS, simulate

COMMANDS = ("transform", "simulate", "fit", "predict", "evaluate", "benchmark")
REDUCTIONS = ("pem", "dt", "ipcw", "crm", "pv")
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
_DEFAULT_OUTPUT = {"transform": "transformed.csv", "simulate": "simulated.csv",
                   "fit": "model.json", "predict": "predictions.csv",
                   "evaluate": "scores.csv", "benchmark": "benchmark.csv"}


class ConfigError(ValueError):
    pass


def _opt(default, help, choices=None):
    return field(default=default, metadata={"help": help, "choices": choices})


@dataclass
class RunConfig:
    input: str = _opt("", "input CSV; benchmark takes a comma-separated list")
    output: str = _opt("", "output path (default depends on the command)")
    model: str = _opt("model.json", "model file for predict/evaluate; 'km' evaluates "
                      "the Kaplan-Meier baseline")
    train: str = _opt("", "training CSV used by evaluate for the censoring "
                      "distribution and tau_max (default: the input)")
    layout: str = _opt("auto", "input layout", ("auto", "standard", "start-stop"))
    kind: str = _opt("auto", "task kind", ("auto", "single-event", "competing-risks",
                                           "multi-state"))
    id_col: str = _opt("id", "subject id column")
    time_col: str = _opt("time", "event/censoring time column")
    status_col: str = _opt("status", "event indicator column")
    cause_col: str = _opt("cause", "cause column (competing risks)")
    entry_col: str = _opt("entry", "left-truncation time column")
    categorical: str = _opt("", "comma-separated categorical feature columns")
    reduction: str = _opt("pem", "reduction technique", REDUCTIONS)
    cuts: str = _opt("", "cut strategy: quantiles:J, equidistant:J, width:w, events "
                     "or explicit:a,b,... (default quantiles with J = min(20, #event times))")
    censoring_rule: str = _opt("previous", "DT treatment of censoring inside an interval",
                               ("previous", "interval"))
    learner: str = _opt("glm", "learner spec, e.g. glm:lam=0.1 or gbt:max_depth=3,nrounds=100")
    formula: str = _opt("", "design formula, e.g. '. + interval + .:a_end' "
                        "(default depends on the reduction)")
    separate: bool = _opt(False, "one learner per cause/transition")
    holdout: float = _opt(0.2, "subject fraction held out for GBT early stopping")
    tau: float = _opt(float("nan"), "horizon: IPCW tau, evaluate/predict tau_max")
    taus: str = _opt("", "comma-separated pseudo-value horizons (default 7 quantiles)")
    quantity: str = _opt("survival", "pseudo-value quantity",
                         ("survival", "rmst", "cif", "transition"))
    target: str = _opt("", "pseudo-value cause or state")
    outputs: str = _opt("survival", "predict quantities: survival, hazard, cif, rmst, "
                        "transition (comma-separated)")
    metric: str = _opt("harrell_c", "tuning metric", bench.METRICS)
    learners: str = _opt(",".join(bench.CATALOG), "benchmark learners (comma-separated)")
    budget: str = _opt("auto", "random-search candidates per outer fold; auto = 50 per "
                       "tunable parameter, 0 = defaults only")
    folds: int = _opt(3, "outer cross-validation folds")
    repeats: int = _opt(0, "outer repeats (0: 3/2/1 by event count)")
    scenario: str = _opt("breakpoint", "simulation scenario", SCENARIOS)
    n: int = _opt(1000, "number of simulated subjects")
    censoring_rate: float = _opt(0.3, "target censoring proportion of simulated data")
    sim_params: str = _opt("", "generator overrides, e.g. amplitude=-2,period=3")
    seed: int = _opt(0, "random seed")


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name, value):
    f = FIELDS[name]
    try:
        if f.type in ("bool", bool):
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if f.type in ("int", int):
            return int(value)
        if f.type in ("float", float):
            return float(value)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {value!r} as {f.type}") from None
    value = str(value)
    choices = f.metadata["choices"]
    if choices and value not in choices:
        raise ConfigError(f"{name}: {value!r} is not one of {', '.join(choices)}")
    return value


def read_config_file(path, command):
    """Values from ``[survreduce]`` and ``[command]`` of an INI file."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = {}
    for section in parser.sections():
        if section != "survreduce" and section not in COMMANDS:
            raise ConfigError(f"{path}: unknown section [{section}]")
    for section in ("survreduce", command):
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            name = key.replace("-", "_")
            if name not in FIELDS:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            values[name] = raw
    return values


def build_config(command, file_values, flag_values):
    merged = dict(file_values)
    merged.update(flag_values)
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in merged.items()})
    if not cfg.output:
        cfg.output = _DEFAULT_OUTPUT[command]
    return cfg


def _parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    for name, f in FIELDS.items():
        default = f.default
        shown = "none" if isinstance(default, float) and np.isnan(default) else default
        help_text = f"{f.metadata['help']} [{name}, default: {shown!s}]"
        flag = "--" + name.replace("_", "-")
        if f.type in ("bool", bool):
            common.add_argument(flag, dest=name, nargs="?", const="true", metavar="BOOL",
                                help=help_text)
        else:
            common.add_argument(flag, dest=name, metavar=name.upper(), help=help_text,
                                choices=f.metadata["choices"])
    top = argparse.ArgumentParser(prog="survreduce", description=__doc__.split("\n\n")[0],
                                  epilog="Run 'survreduce COMMAND --help' for the options.")
    top.add_argument("--config", help="INI configuration file")
    sub = top.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {"transform": "write the reduced (long/ipcw/crm/pv) data set and a state file",
             "simulate": "generate a synthetic single-event data set",
             "fit": "fit a reduction model and save it as JSON",
             "predict": "predict survival quantities from a saved model",
             "evaluate": "score a model with Harrell's C and the integrated Brier score",
             "benchmark": "nested cross-validated comparison of learners"}
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, parents=[common], help=helps[cmd], description=helps[cmd])
        p.add_argument("--config", help="INI configuration file", default=argparse.SUPPRESS)
    return top


# helpers --------------------------------------------------------------------

def _format(cfg):
    cats = tuple(c.strip() for c in cfg.categorical.split(",") if c.strip())
    return FormatSpec(layout=cfg.layout, id=cfg.id_col, time=cfg.time_col,
                      status=cfg.status_col, cause=cfg.cause_col, entry=cfg.entry_col,
                      categorical=cats, kind=None if cfg.kind == "auto" else cfg.kind)


def _load(cfg, path=None):
    path = path or cfg.input
    if not path:
        raise ConfigError("an input file is required (--input)")
    return load_csv(path, _format(cfg))


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


def _require_tau(cfg, what):
    if np.isnan(cfg.tau):
        raise ConfigError(f"{what} needs a horizon (--tau)")
    return cfg.tau


def _sim_params(text):
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"sim_params: expected key=value, got {item!r}")
        value = value.strip()
        if value.lower() in ("true", "false"):
            out[key.strip()] = value.lower() == "true"
        else:
            try:
                out[key.strip()] = float(value)
            except ValueError:
                raise ConfigError(f"sim_params: {key}: not a number") from None
    if "noise" in out:
        out["noise"] = int(out["noise"])
    return out


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)


def state_path(output):
    return str(output) + ".state.json"


def _pv_set(cfg, task):
    taus = _floats(cfg.taus) or None
    return pseudo_values(task, cfg.quantity, taus, cfg.target or None)


# commands -------------------------------------------------------------------

def cmd_transform(cfg):
    task = _load(cfg)
    if cfg.reduction in (PEM, DT):
        grid = make_cuts(task, cfg.cuts or None)
        long = expand(task, grid)
        if cfg.reduction == DT:
            long = long.take(dt_risk_rows(long, cfg.censoring_rule))
        long.to_csv(cfg.output)
        state = {"reduction": cfg.reduction, "grid": grid.to_dict(),
                 "censoring_rule": cfg.censoring_rule}
    elif cfg.reduction == "ipcw":
        data = ipcw_transform(task, _require_tau(cfg, "the IPCW transform"))
        data.to_csv(cfg.output)
        state = {"reduction": "ipcw", "tau": data.tau, "censoring": data.G.to_dict()}
    elif cfg.reduction == "crm":
        crm_targets(task).to_csv(cfg.output)
        state = {"reduction": "crm"}
    else:
        pv = _pv_set(cfg, task)
        pv.to_csv(cfg.output)
        state = {"reduction": "pv", "quantity": pv.quantity, "target": pv.target,
                 "taus": [float(t) for t in pv.taus]}
    _write_json(state_path(cfg.output), state)
    return f"wrote {cfg.output} and {state_path(cfg.output)}"


def cmd_simulate(cfg):
    task = simulate(cfg.scenario, cfg.n, cfg.seed, cfg.censoring_rate, **_sim_params(cfg.sim_params))
    export_csv(task, cfg.output)
    return f"wrote {cfg.n} subjects to {cfg.output}"


def fit_model(cfg, task):
    if cfg.reduction in (PEM, DT):
        kw = dict(grid=cfg.cuts or None, learner=cfg.learner, formula=cfg.formula or None,
                  separate=cfg.separate, holdout=cfg.holdout, seed=cfg.seed)
        if cfg.reduction == PEM:
            return pem_fit(task, **kw)
        return dt_fit(task, censoring=cfg.censoring_rule, **kw)
    if cfg.reduction == "ipcw":
        return ipcw_fit(task, _require_tau(cfg, "an IPCW fit"), cfg.learner, cfg.formula or ".")
    if cfg.reduction == "crm":
        return crm_fit(task, cfg.learner, cfg.formula or ".")
    return pv_fit(_pv_set(cfg, task), cfg.learner, cfg.formula or ". + tau")


def cmd_fit(cfg):
    model = fit_model(cfg, _load(cfg))
    save_model(model, cfg.output)
    return f"saved {cfg.reduction} model to {cfg.output}"


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_predict(cfg):
    model = load_model(cfg.model)
    task = _load(cfg)
    if isinstance(model, FittedReduction):
        quantities = tuple(q.strip() for q in cfg.outputs.split(",") if q.strip())
        tau = None if np.isnan(cfg.tau) else cfg.tau
        if "rmst" in quantities and tau is None:
            raise ConfigError("the rmst output needs --tau")
        model.predict(task).to_csv(cfg.output, quantities, tau)
        return f"wrote predictions to {cfg.output}"
    ids = list(dict.fromkeys(task.ids.tolist()))
    if model.model == "ipcw":
        risk = model.predict_risk(task)
        rows = [[i, fmt_float(model.tau), fmt_float(r), fmt_float(1 - r)] for i, r in zip(ids, risk)]
        _write_rows(cfg.output, ["id", "tau", "risk", "survival"], rows)
    elif model.model == "crm":
        rows = [[i, fmt_float(r)] for i, r in zip(ids, model.predict_risk(task))]
        _write_rows(cfg.output, ["id", "risk"], rows)
    else:
        taus = _floats(cfg.taus) or list(model.taus)
        pred = model.predict(task, taus)
        rows = [[i, fmt_float(t), model.quantity, fmt_float(v)]
                for i, row in zip(ids, pred) for t, v in zip(taus, row)]
        _write_rows(cfg.output, ["id", "tau", "quantity", "value"], rows)
    return f"wrote predictions to {cfg.output}"


def cmd_evaluate(cfg):
    test = _load(cfg)
    train = _load(cfg, cfg.train) if cfg.train else test
    tau_max = default_tau_max(train.time) if np.isnan(cfg.tau) else cfg.tau
    G = censoring_km(train.time, train.status)
    if cfg.model == "km":
        curves = bench.KMModel(train).curves(test)
        risk = -curves.rmst(tau_max)
    else:
        model = load_model(cfg.model)
        if isinstance(model, PointFit):
            if model.model == "pv":
                raise ConfigError("evaluate supports distributional, ipcw and crm models")
            curves = None
            risk = model.predict_risk(test)
        else:
            curves = model.predict(test)
            risk = -curves.rmst(tau_max)
    if test.kind != "single-event":
        raise ConfigError("evaluate scores single-event tasks")
    rows = [["harrell_c", fmt_float(harrell_c(risk, test.time, test.status))]]
    if curves is not None:
        rows.append(["isbs", fmt_float(isbs(curves, test.time, test.status, G, tau_max))])
    rows.append(["tau_max", fmt_float(tau_max)])
    _write_rows(cfg.output, ["metric", "value"], rows)
    return "\n".join(f"{m}\t{v}" for m, v in rows)


def aggregate_path(output):
    p = Path(output)
    return str(p.with_name(p.stem + "_aggregate" + (p.suffix or ".csv")))


def cmd_benchmark(cfg):
    paths = [p.strip() for p in cfg.input.split(",") if p.strip()]
    if not paths:
        raise ConfigError("benchmark needs at least one input file (--input)")
    tasks = {Path(p).stem: _load(cfg, p) for p in paths}
    learners = [s.strip() for s in cfg.learners.split(",") if s.strip()]
    for name in learners:
        if name not in bench.CATALOG:
            raise ConfigError(f"unknown learner {name!r}; choose from {', '.join(bench.CATALOG)}")
    if cfg.budget == "auto":
        budget = None
    else:
        try:
            budget = int(cfg.budget)
        except ValueError:
            raise ConfigError(f"budget: expected 'auto' or an integer, got {cfg.budget!r}") from None
    table = bench.benchmark(tasks, learners, cfg.metric, budget, cfg.folds,
                            cfg.repeats or None, cfg.seed)
    table.to_csv(cfg.output)
    table.aggregate_csv(aggregate_path(cfg.output))
    return f"wrote {cfg.output} and {aggregate_path(cfg.output)}"


HANDLERS = {"transform": cmd_transform, "simulate": cmd_simulate, "fit": cmd_fit,
            "predict": cmd_predict, "evaluate": cmd_evaluate, "benchmark": cmd_benchmark}


def exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, SchemaError, IdentifiabilityError, OSError,
                        json.JSONDecodeError, KeyError)):
        return EXIT_DATA
    if isinstance(exc, (ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    return EXIT_CONFIG


def main(argv=None):
    args = vars(_parser().parse_args(argv))
    command = args.pop("command")
    config_file = args.pop("config", None)
    try:
        file_values = read_config_file(config_file, command) if config_file else {}
        cfg = build_config(command, file_values, args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            message = HANDLERS[command](cfg)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit code
        print(f"survreduce {command}: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    if message:
        print(message)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
