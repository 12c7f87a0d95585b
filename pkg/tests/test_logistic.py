import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import numeric_gradient, woolf_se

from netclassify import logistic as lg
from netclassify.errors import (DimensionMismatch, NotConverged, Separation, Singular, SingleClass,
                                UnknownTerm)


def two_by_two(a=30, b=10, c=20, d=40):
    """x=1: a positives, b negatives; x=0: c positives, d negatives."""
    x = np.r_[np.ones(a + b), np.zeros(c + d)]
    y = np.r_[np.ones(a), np.zeros(b), np.ones(c), np.zeros(d)]
    return x[:, None], y


def test_intercept_only():
    y = np.r_[np.ones(3), np.zeros(7)]
    m = lg.fit(np.empty((10, 0)), y)
    assert m.converged
    assert abs(m.beta[0] - math.log(3 / 7)) < 1e-8
    assert m.terms == ("Intercept",)


def test_two_by_two_closed_forms():
    X, y = two_by_two()
    m = lg.fit(X, y)
    assert abs(m.beta[1] - math.log(6.0)) < 1e-8
    assert abs(m.beta[0] - math.log(20 / 40)) < 1e-8
    assert abs(m.se[1] - woolf_se(30, 10, 20, 40)) < 1e-8
    z, p = lg.wald(m, "x1")
    assert z == pytest.approx(math.log(6) / woolf_se(30, 10, 20, 40), rel=1e-8)
    assert z == pytest.approx(3.93, abs=5e-3)
    (row,) = lg.odds_ratio_table(m)
    se = woolf_se(30, 10, 20, 40)
    assert row.estimate == pytest.approx(6.0, rel=1e-8)
    assert row.ci_low == pytest.approx(6 * math.exp(-1.96 * se), rel=1e-8)
    assert row.ci_high == pytest.approx(6 * math.exp(1.96 * se), rel=1e-8)
    assert (round(row.ci_low, 2), round(row.ci_high, 2)) == (2.45, 14.68)


def test_wald_p_values():
    m = lg.LogisticModel(("Intercept", "a", "b"), ("Intercept", "a", "b"), np.array([0.0, 0.0, 0.196]),
                         np.diag([1.0, 1.0, 0.01]), 0.0, True)
    assert lg.wald(m, "a") == (0.0, 1.0)
    assert lg.wald(m, "b")[1] == pytest.approx(0.05, abs=1e-3)
    with pytest.raises(UnknownTerm):
        lg.wald(m, "c")


def test_wald_normal_tail_accuracy():
    from scipy.stats import norm
    for z in np.linspace(0.0, 8.0, 81):
        m = lg.LogisticModel(("Intercept", "a"), ("Intercept", "a"), np.array([0.0, z + 1e-300]),
                             np.eye(2), 0.0, True)
        assert abs(lg.wald(m, "a")[1] - 2 * norm.sf(z)) < 1e-7


def test_null_odds_ratio_row():
    m = lg.LogisticModel(("Intercept", "a"), ("Intercept", "a"), np.array([0.3, 0.0]),
                         np.diag([1.0, 0.01]), 0.0, True)
    (row,) = lg.odds_ratio_table(m)
    assert (row.estimate, round(row.ci_low, 2), round(row.ci_high, 2)) == (1.0, 0.82, 1.22)
    m.converged = False
    with pytest.raises(NotConverged):
        lg.odds_ratio_table(m)


def test_odds_ratio_csv_format():
    rows = [lg.OddsRatioRow("BMI", 3.77, 1.96, 7.22)]
    assert lg.odds_ratio_csv(rows) == 'Effect,Estimate,95% CI\nBMI,3.77,"(1.96,7.22)"\n'


def test_predict_prob():
    m = lg.LogisticModel(("Intercept", "a"), ("Intercept", "a"), np.array([0.0, 1.0]),
                         np.eye(2), 0.0, True)
    assert lg.predict_prob(m, [0.0]) == 0.5
    assert lg.predict_prob(m, [math.log(3)]) == pytest.approx(0.75, abs=1e-15)
    assert lg.predict_prob(m, [0.1]) < lg.predict_prob(m, [0.2])
    with pytest.raises(DimensionMismatch):
        lg.predict_prob(m, [1.0, 2.0])


def test_errors():
    with pytest.raises(SingleClass):
        lg.fit(np.ones((5, 1)), np.ones(5))
    X = np.random.default_rng(0).normal(size=(20, 1))
    with pytest.raises(Singular):
        lg.fit(np.c_[X, 2 * X], np.r_[np.ones(10), np.zeros(10)])


def test_separation_flagged():
    x = np.linspace(-1, 1, 20)
    y = (x > 0).astype(float)
    with pytest.warns(Separation):
        m = lg.fit(x[:, None], y)
    assert m.separated and not m.converged
    assert np.abs(m.beta).max() > 30


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        n, p = int(rng.integers(5, 60)), int(rng.integers(1, 5))
        Z = np.c_[np.ones(n), rng.normal(size=(n, p))]
        y = (rng.random(n) < 0.4).astype(float)
        beta = rng.normal(scale=0.7, size=p + 1)
        g = lg.score(beta, Z, y)
        fd = numeric_gradient(lambda b: lg.log_likelihood(b, Z, y), beta)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-12))
    assert worst < 1e-6


@given(st.integers(0, 10_000))
def test_score_equations_and_monotone_likelihood(seed):
    rng = np.random.default_rng(seed)
    n, p = 200, 3
    X = rng.normal(size=(n, p))
    y = (rng.random(n) < 1 / (1 + np.exp(-(X @ [1.0, -0.5, 0.0] - 0.5)))).astype(float)
    m = lg.fit(X, y)
    assert m.converged
    Z = np.c_[np.ones(n), X]
    assert np.abs(Z.T @ (y - m.predict_proba(X))).max() < 1e-6
    # non-decreasing up to rounding; the final polishing step is judged by the score
    assert all(b >= a - 1e-12 * abs(a) for a, b in zip(m.history, m.history[1:]))
    cov = m.covariance
    np.testing.assert_array_equal(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() > 0


# the separation bound is on raw coefficients, so keep rescaled slopes well under it
@given(st.integers(0, 10_000), st.floats(0.1, 100.0))
def test_affine_invariance(seed, c):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(300, 2))
    y = (rng.random(300) < 1 / (1 + np.exp(-X @ [0.8, 0.3]))).astype(float)
    a = lg.fit(X, y)
    b = lg.fit(X * [c, 1.0], y)
    assert b.beta[1] * c == pytest.approx(a.beta[1], rel=1e-8, abs=1e-10)
    assert b.se[1] * c == pytest.approx(a.se[1], rel=1e-8)
    assert lg.wald(b, "x1")[0] == pytest.approx(lg.wald(a, "x1")[0], rel=1e-7)


def test_stepwise_empty_predictors():
    m = lg.stepwise(np.empty((10, 0)), np.r_[np.ones(4), np.zeros(6)])
    assert m.terms == ("Intercept",)


def test_stepwise_removes_nominal_groups_whole():
    rng = np.random.default_rng(1)
    n = 600
    signal = rng.normal(size=n)
    cat = rng.integers(0, 3, n)
    X = np.c_[signal, cat == 0, cat == 1].astype(float)
    y = (rng.random(n) < 1 / (1 + np.exp(-2 * signal))).astype(float)
    m = lg.stepwise(X, y, ["S", "G=a", "G=b"], ["S", "G", "G"], alpha=0.05)
    assert "S" in m.terms
    assert ("G=a" in m.terms) == ("G=b" in m.terms)


def test_stepwise_strong_signal_kept_noise_dropped():
    kept = noise = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(2000, 6))
        y = (rng.random(2000) < 1 / (1 + np.exp(-2 * X[:, 0]))).astype(float)
        m = lg.stepwise(X, y)
        kept += "x1" in m.terms
        noise += len(m.terms) - 1 - ("x1" in m.terms)
    assert kept == 20
    assert noise / (20 * 5) < 0.2


def test_cross_validate():
    rng = np.random.default_rng(2)
    x = rng.normal(size=400)
    y = (x + 0.05 * rng.normal(size=400) > 0).astype(float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", Separation)
        assert lg.cross_validate(x[:, None], y, folds=10, seed=1).mean_auc > 0.99
    X = rng.normal(size=(2000, 3))
    noise = lg.cross_validate(X, (rng.random(2000) < 0.3).astype(float), folds=10, seed=1)
    assert 0.45 < noise.mean_auc < 0.55
    small = lg.cross_validate(X[:15, :1], np.r_[np.ones(6), np.zeros(9)], folds=15, seed=1)
    assert len(small.fold_auc) == 15 and 0 <= small.mean_auc <= 1
    a = lg.cross_validate(X[:300], (X[:300, 0] > 0.3).astype(float) * 0 + (rng.random(300) < 0.5),
                          folds=5, seed=9)
    assert a.mean_error >= 0


def test_cross_validate_deterministic():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(200, 2))
    y = (rng.random(200) < 1 / (1 + np.exp(-X[:, 0]))).astype(float)
    assert lg.cross_validate(X, y, seed=4) == lg.cross_validate(X, y, seed=4)


def test_model_json_roundtrip():
    X, y = two_by_two()
    m = lg.fit(X, y, ["BMI=1"], ["BMI"])
    text = m.to_json()
    doc = json.loads(text)
    assert doc["terms"] == ["Intercept", "BMI=1"] and len(doc["se"]) == 2
    back = lg.LogisticModel.from_json(text)
    np.testing.assert_array_equal(back.beta, m.beta)
    np.testing.assert_array_equal(back.covariance, m.covariance)
    assert back.groups == m.groups
