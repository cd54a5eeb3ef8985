"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--n 2000] [--repeat 3]

Each case runs through the public API under both backends, checks that the
results agree and reports the best wall time of ``--repeat`` runs. Numba
compilation happens in an untimed warm-up call.
"""
import argparse
import time

import numpy as np

from survreduce import crm_targets, harrell_c, pseudo_values, simulate, using_backend
from survreduce.learners import GbtParams, fit_gbt
from survreduce.reduce_point import RMST


def cases(n, seed):
    rng = np.random.default_rng(seed)
    task = simulate("breakpoint", n, seed)
    small = simulate("breakpoint", min(n, 600), seed + 1)
    risk = rng.normal(size=n)
    X = rng.normal(size=(20 * n, 5))
    y = (X[:, 0] + 0.5 * X[:, 1] ** 2 + rng.normal(size=len(X)) > 0).astype(float)
    params = GbtParams(nrounds=50, max_depth=4)
    return {
        "pseudo-values (loo KM, rmst)": lambda: pseudo_values(task, RMST).values,
        "crm targets (pair table)": lambda: crm_targets(small).targets,
        "harrell C (pair counts)": lambda: np.array([harrell_c(risk, task.time, task.status)]),
        f"gbt fit ({len(X)} rows, 50 trees)":
            lambda: fit_gbt(X, y, loss="logistic", params=params).predict(X),
    }


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n", type=int, default=2000, help="subjects per data set")
    ap.add_argument("--repeat", type=int, default=3, help="timed runs per backend")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    print(f"{'case':40s} {'numba s':>10s} {'numpy s':>10s} {'speed-up':>9s}  max|diff|")
    for name, fn in cases(args.n, args.seed).items():
        with using_backend("numba"):
            fn()
            t_nb, out_nb = best_time(fn, args.repeat)
        with using_backend("numpy"):
            t_np, out_np = best_time(fn, args.repeat)
        diff = float(np.max(np.abs(np.asarray(out_nb) - np.asarray(out_np))))
        print(f"{name:40s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
