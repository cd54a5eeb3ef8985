import json

import numpy as np
import pytest
from scipy import optimize
from scipy.special import expit

from survreduce.learners import (DesignSpec, FormulaSpec, Frame, GbtError, GbtParams, GlmError,
                                 LearnerSpec, SchemaError, SchemaWarning, fit_gbt, fit_glm,
                                 fit_learner, load_learner)
from survreduce.learners.glm import score


def negloglik(family, X1, y, off, w, lam):
    def f(beta):
        eta = off + X1 @ beta
        if family == "poisson":
            v = np.exp(eta) - y * eta
        elif family == "binomial":
            v = np.logaddexp(0, eta) - y * eta
        else:
            v = 0.5 * (y - eta) ** 2
        return np.sum(w * v) + 0.5 * lam * np.sum(beta[1:] ** 2)
    return f


@pytest.mark.parametrize("family", ["poisson", "binomial", "gaussian"])
def test_glm_matches_direct_optimisation(family):
    rng = np.random.default_rng(0)
    n = 300
    X = rng.normal(size=(n, 3))
    off = rng.normal(scale=0.3, size=n) if family == "poisson" else np.zeros(n)
    eta = 0.3 + X @ np.array([0.5, -0.4, 0.2]) + off
    if family == "poisson":
        y = rng.poisson(np.exp(eta)).astype(float)
    elif family == "binomial":
        y = (rng.random(n) < expit(eta)).astype(float)
    else:
        y = eta + rng.normal(size=n)
    w = rng.uniform(0.5, 2, n)
    for lam in (0.0, 2.0):
        fit = fit_glm(X, y, off, w, family, lam=lam)
        X1 = np.column_stack([np.ones(n), X])
        # the IRLS deviance penalty lam*|b|^2 equals 2 * (nll + lam/2 |b|^2)
        ref = optimize.minimize(negloglik(family, X1, y, off, w, lam), np.zeros(4),
                                method="BFGS", options={"gtol": 1e-10}).x
        np.testing.assert_allclose(fit.coef, ref, atol=1e-5)


def test_glm_score_vanishes_and_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 2))
    y = rng.poisson(np.exp(0.2 + X[:, 0])).astype(float)
    fit = fit_glm(X, y, family="poisson", lam=0.5)
    assert np.max(np.abs(score(fit, X, y))) < 1e-6
    # score equals minus the numeric gradient of the penalised negative log-likelihood
    X1 = np.column_stack([np.ones(200), X])
    f = negloglik("poisson", X1, y, np.zeros(200), np.ones(200), 0.5)
    beta = fit.coef + np.array([0.1, -0.2, 0.05])
    fit.coef = beta
    num = optimize.approx_fprime(beta, f, 1e-6)
    np.testing.assert_allclose(score(fit, X, y), -num, atol=1e-3)


def test_glm_poisson_intercept_closed_form():
    y = np.array([0, 1, 3, 0, 2], float)
    off = np.log([1.0, 2.0, 0.5, 1.5, 3.0])
    fit = fit_glm(np.zeros((5, 0)), y, off, family="poisson")
    assert fit.coef[0] == pytest.approx(np.log(y.sum() / np.exp(off).sum()), abs=1e-12)


def test_glm_saturated_zero_cell_converges():
    # one cell without events: its rate must head to zero, not stop early
    X = np.repeat(np.eye(3)[:, 1:], 4, axis=0)
    y = np.array([1, 0, 0, 1, 0, 0, 0, 0, 2, 1, 0, 0], float)
    fit = fit_glm(X, y, np.zeros(12), family="poisson")
    rates = np.exp(fit.coef[0] + np.r_[0, fit.coef[1:]])
    assert rates[1] < 1e-7
    np.testing.assert_allclose(rates[[0, 2]], [0.5, 0.75], rtol=1e-9)


def test_glm_rank_deficient():
    X = np.column_stack([np.arange(5.0), 2 * np.arange(5.0)])
    with pytest.raises(GlmError, match="rank deficient"):
        fit_glm(X, np.ones(5), family="poisson")
    fit_glm(X, np.array([1, 0, 2, 1, 3.0]), family="poisson", lam=1.0)


def test_glm_separation_reports_failure():
    X = np.arange(10.0)[:, None]
    y = (X[:, 0] > 4.5).astype(float)
    with pytest.raises(GlmError) as err:
        fit_glm(X, y, family="binomial", max_iter=25)
    assert err.value.coef is not None


def test_glm_input_validation():
    with pytest.raises(ValueError):
        fit_glm(np.ones((3, 1)), [0, 1, 2], family="binomial")
    with pytest.raises(ValueError):
        fit_glm(np.ones((3, 1)), [-1, 1, 2], family="poisson")
    with pytest.raises(ValueError):
        fit_glm(np.ones((3, 1)), [1, 1], family="poisson")


def test_glm_serialisation_round_trip():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 2))
    fit = fit_glm(X, rng.poisson(1.0, 50).astype(float), family="poisson")
    again = load_learner(json.loads(json.dumps(fit.to_dict())))
    np.testing.assert_array_equal(again.predict(X), fit.predict(X))


def step_data(n=400, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(n, 2))
    y = np.where(X[:, 0] > 0.6, 2.0, -1.0) + 0.01 * rng.normal(size=n)
    return X, y


def test_gbt_stump_finds_split():
    X, y = step_data()
    fit = fit_gbt(X, y, loss="squared", params=GbtParams(nrounds=1, max_depth=1, learning_rate=1,
                                                           reg_lambda=0, min_leaf=1))
    assert fit.feature[0] == 0 and 0.55 < fit.threshold[0] < 0.65
    np.testing.assert_allclose(fit.predict(X), np.where(X[:, 0] > 0.6, 2, -1), atol=0.01)


def test_gbt_zero_rounds_is_base_score():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 2))
    y = rng.poisson(2.0, 30).astype(float)
    off = np.log(rng.uniform(0.5, 2, 30))
    fit = fit_gbt(X, y, off, loss="poisson", params=GbtParams(nrounds=0))
    assert fit.n_trees == 0
    assert fit.base_score == pytest.approx(np.log(y.sum() / np.exp(off).sum()))


@pytest.mark.parametrize("loss", ["squared", "poisson", "logistic"])
def test_gbt_training_loss_decreases_and_depth_bounded(loss):
    rng = np.random.default_rng(4)
    X = rng.normal(size=(500, 3))
    eta = np.sin(2 * X[:, 0]) + 0.5 * X[:, 1]
    y = {"squared": eta + rng.normal(size=500),
         "poisson": rng.poisson(np.exp(eta)).astype(float),
         "logistic": (rng.random(500) < expit(eta)).astype(float)}[loss]
    fit = fit_gbt(X, y, loss=loss, params=GbtParams(nrounds=40, max_depth=2, min_leaf=10))
    assert np.all(np.diff(fit.train_loss) <= 1e-12)
    assert max(fit.tree_depth(t) for t in range(fit.n_trees)) <= 2


def test_gbt_min_leaf_respected():
    X, y = step_data(200)
    fit = fit_gbt(X, y, params=GbtParams(nrounds=5, max_depth=6, min_leaf=30))
    for t in range(fit.n_trees):
        leaf_values = fit.predict_link(X, t + 1) - fit.predict_link(X, t)
        _, counts = np.unique(np.round(leaf_values, 14), return_counts=True)
        assert counts.min() >= 30


def test_gbt_early_stopping_picks_best_round():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(300, 2))
    y = X[:, 0] + rng.normal(size=300)
    Xh = rng.normal(size=(200, 2))
    yh = Xh[:, 0] + rng.normal(size=200)
    params = GbtParams(nrounds=300, max_depth=4, min_leaf=2, early_stop_rounds=10)
    fit = fit_gbt(X, y, params=params, valid=(Xh, yh, None, None))
    assert fit.n_trees < 300
    assert fit.best_iteration == int(np.argmin(fit.valid_loss))
    assert fit.n_trees - fit.best_iteration == 10
    with pytest.raises(GbtError):
        fit_gbt(X, y, params=params)


def test_gbt_deterministic_and_serialisable():
    X, y = step_data()
    a = fit_gbt(X, y, params=GbtParams(nrounds=20))
    b = fit_gbt(X, y, params=GbtParams(nrounds=20))
    np.testing.assert_array_equal(a.predict(X), b.predict(X))
    c = load_learner(json.loads(json.dumps(a.to_dict())))
    np.testing.assert_array_equal(c.predict(X), a.predict(X))
    with pytest.raises(ValueError, match="design columns"):
        a.predict(X[:, :1])


def test_learner_spec_parse():
    spec = LearnerSpec.parse("gbt:learning_rate=0.05,max_depth=2,early_stop_rounds=none")
    assert spec.params == {"learning_rate": 0.05, "max_depth": 2, "early_stop_rounds": None}
    assert LearnerSpec.parse(str(spec)) == spec
    with pytest.raises(ValueError):
        LearnerSpec.parse("gbt:depth=2")
    with pytest.raises(ValueError):
        LearnerSpec.parse("forest")


def test_fit_learner_family_mapping():
    X, y = step_data()
    fit = fit_learner("gbt:nrounds=3", X, (y > 0).astype(float), family="binomial")
    assert fit.loss == "logistic"
    assert np.all((fit.predict(X) > 0) & (fit.predict(X) < 1))


def test_formula_parsing():
    f = FormulaSpec.parse("a*b + c")
    assert f.terms == (("a",), ("b",), ("a", "b"), ("c",))
    g = FormulaSpec.parse(". + interval + .:a_end")
    assert g.expand(["x", "z"]) == (("x",), ("z",), ("interval",), ("x", "a_end"),
                                    ("z", "a_end"))
    assert str(FormulaSpec.parse("1")) == "1"
    with pytest.raises(ValueError):
        FormulaSpec.parse("a: + b")


def test_design_one_hot_and_interactions():
    frame = Frame({"sex": [0, 1, 2, 1], "age": [1.0, 2.0, 3.0, 4.0]},
                  {"sex": ("f", "m", "x")})
    spec = DesignSpec.fit(frame, "sex*age")
    assert spec.names == ("sex[m]", "sex[x]", "age", "sex[m]:age", "sex[x]:age")
    M = spec.transform(frame).values
    np.testing.assert_array_equal(M[:, 3], [0, 2, 0, 4])
    again = DesignSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    np.testing.assert_array_equal(again.transform(frame).values, M)


def test_design_unseen_level_and_schema_errors():
    train = Frame({"g": [0, 1]}, {"g": ("a", "b")})
    spec = DesignSpec.fit(train, "g")
    new = Frame({"g": [0, 1]}, {"g": ("b", "zzz")})
    with pytest.warns(SchemaWarning):
        dm = spec.transform(new)
    np.testing.assert_array_equal(dm.values[:, 0], [1, 0])
    assert dm.unknown_levels == 1
    with pytest.raises(SchemaError):
        spec.transform(Frame({"g": [0.5, 1.0]}))
    with pytest.raises(SchemaError):
        spec.transform(Frame({"h": [1.0]}))
    with pytest.raises(SchemaError):
        DesignSpec.fit(train, "nope")
