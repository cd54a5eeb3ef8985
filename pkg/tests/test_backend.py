import json
import os
import subprocess
import sys

import numpy as np
import pytest

from survreduce import _accel, kernels
from survreduce.learners import GbtParams, fit_gbt
from survreduce.metrics import harrell_c
from survreduce.reduce_point import crm_targets, pseudo_values
from survreduce.data import SurvivalTask

from conftest import random_competing, random_single

needs_numba = pytest.mark.skipif(not _accel.NUMBA_AVAILABLE, reason="numba not installed")


def both(fn):
    with _accel.using_backend("numba"):
        a = fn()
    with _accel.using_backend("numpy"):
        b = fn()
    return a, b


@needs_numba
def test_pseudo_value_kernels_agree():
    rng = np.random.default_rng(0)
    for _ in range(10):
        t, d = random_single(rng, 60)
        task = SurvivalTask.from_arrays(t, d)
        for q in ("survival", "rmst"):
            a, b = both(lambda: pseudo_values(task, q).values)
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
        ctask = random_competing(rng, 60)
        a, b = both(lambda: pseudo_values(ctask, "cif").values)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@needs_numba
def test_crm_and_harrell_kernels_agree():
    rng = np.random.default_rng(1)
    for _ in range(10):
        t, d = random_single(rng, 80, digits=1)
        task = SurvivalTask.from_arrays(t, d)
        a, b = both(lambda: crm_targets(task).targets)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)
        risk = np.round(rng.normal(size=len(t)), 1)
        a, b = both(lambda: harrell_c(risk, t, d))
        assert a == b


@needs_numba
def test_harrell_chunking_matches():
    rng = np.random.default_rng(2)
    t, d = random_single(rng, 1500)
    risk = rng.normal(size=1500)
    assert kernels._harrell_np(risk, t, d, chunk=7) == kernels._harrell_nb(risk, t, d)


@needs_numba
@pytest.mark.parametrize("loss", ["squared", "poisson", "logistic"])
def test_gbt_is_bit_identical(loss):
    rng = np.random.default_rng(3)
    X = np.round(rng.normal(size=(400, 4)), 1)
    eta = X[:, 0] - 0.5 * X[:, 1] ** 2
    y = {"squared": eta + rng.normal(size=400),
         "poisson": rng.poisson(np.exp(eta / 2)).astype(float),
         "logistic": (rng.random(400) < 1 / (1 + np.exp(-eta))).astype(float)}[loss]
    params = GbtParams(nrounds=15, max_depth=3, min_leaf=5)
    a, b = both(lambda: fit_gbt(X, y, loss=loss, params=params))
    np.testing.assert_array_equal(a.feature, b.feature)
    np.testing.assert_array_equal(a.threshold, b.threshold)
    np.testing.assert_array_equal(a.value, b.value)
    pa, pb = both(lambda: a.predict(X))
    np.testing.assert_array_equal(pa, pb)


def test_backend_switching():
    before = _accel.backend()
    with _accel.using_backend("numpy"):
        assert _accel.backend() == "numpy" and not _accel.use_numba()
    assert _accel.backend() == before
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")


def test_environment_variable_selects_backend():
    code = ("import json, numpy as np; from survreduce import _accel, simulate, harrell_c; "
            "t = simulate('breakpoint', 300, 1); "
            "print(json.dumps([_accel.backend(), harrell_c(-t.X[:, 0], t.time, t.status)]))")
    out = {}
    for name in ("numpy", "numba"):
        env = dict(os.environ, SURVREDUCE_BACKEND=name)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        out[name] = json.loads(res.stdout)
    assert out["numpy"][0] == "numpy"
    if _accel.NUMBA_AVAILABLE:
        assert out["numba"][0] == "numba"
    assert out["numpy"][1] == out["numba"][1]
    env = dict(os.environ, SURVREDUCE_BACKEND="fortran")
    res = subprocess.run([sys.executable, "-c", "import survreduce"], env=env,
                         capture_output=True, text=True)
    assert res.returncode != 0 and "SURVREDUCE_BACKEND" in res.stderr
