import math

import numpy as np
import pytest
import scipy.stats as ss
from hypothesis import given, settings
from hypothesis import strategies as st

from countcast.glm import (
    FamilySpec,
    FittedModel,
    MeanOverflowError,
    fit_glm,
    fitted_mean,
    information_criteria,
    log_likelihood,
    negbin_logpmf,
    poisson_logpmf,
    predict_mean,
    sample_response,
    score,
)

sm = pytest.importorskip("statsmodels.api")


def _poisson_data(rng, n=2000, beta=(1.0, 0.5)):
    x = rng.uniform(size=n)
    X = np.column_stack([np.ones(n), x])
    y = rng.poisson(np.exp(X @ np.asarray(beta)))
    return X, y


def test_intercept_only_is_log_mean():
    m = fit_glm(np.ones((6, 1)), [1, 2, 3, 4, 5, 3])
    assert m.beta[0] == pytest.approx(math.log(3.0), abs=1e-10)
    assert fitted_mean(m, np.ones((1, 1)))[0] == pytest.approx(3.0, abs=1e-9)


def test_poisson_matches_statsmodels(rng):
    X, y = _poisson_data(rng)
    ours = fit_glm(X, y)
    ref = sm.GLM(y, X, family=sm.families.Poisson()).fit()
    np.testing.assert_allclose(ours.beta, ref.params, atol=1e-8)
    np.testing.assert_allclose(ours.bse, ref.bse, rtol=1e-6)
    assert ours.log_likelihood == pytest.approx(ref.llf, abs=1e-6)
    assert ours.converged


def test_negbin_matches_statsmodels_at_its_theta(rng):
    n = 5000
    x = rng.uniform(size=n)
    X = np.column_stack([np.ones(n), x])
    mu = np.exp(2.0 + 0.7 * x)
    y = rng.poisson(rng.gamma(4.0, mu / 4.0))
    ours = fit_glm(X, y, "negbin")
    ref = sm.NegativeBinomial(y, X).fit(disp=0)  # alpha = 1 / theta
    np.testing.assert_allclose(ours.beta, ref.params[:2], atol=1e-4)
    assert 1.0 / ours.theta == pytest.approx(ref.params[2], rel=1e-3)
    assert ours.log_likelihood == pytest.approx(ref.llf, abs=1e-4)
    assert ours.n_params == 3


def test_negbin_theta_recovery(rng):
    y = rng.poisson(rng.gamma(5.0, 20.0 / 5.0, size=10000))
    m = fit_glm(np.ones((len(y), 1)), y, "negbin")
    assert abs(m.theta - 5.0) / 5.0 < 0.2


def test_score_vanishes_at_optimum(rng):
    X, y = _poisson_data(rng, n=3000)
    m = fit_glm(X, y)
    assert np.max(np.abs(score(m, X, y))) < 1e-6 * len(y)
    yb = rng.poisson(rng.gamma(3.0, np.exp(X @ [1.0, 0.5]) / 3.0))
    mb = fit_glm(X, yb, "negbin")
    assert np.max(np.abs(score(mb, X, yb))) < 1e-6 * len(yb)


def test_logpmf_examples():
    assert poisson_logpmf(np.array([1, 0]), np.array([1.0, 1.0])).sum() == pytest.approx(-2.0)
    assert poisson_logpmf(2, 2.0) == pytest.approx(math.log(2) - 2, abs=1e-12)
    ys = np.arange(0, 400)
    assert np.exp(negbin_logpmf(ys, 3.0, 2.0)).sum() == pytest.approx(1.0, abs=1e-9)


@given(st.integers(0, 200), st.floats(1e-3, 300), st.floats(0.05, 1e3))
def test_densities_match_scipy(y, mu, theta):
    assert poisson_logpmf(y, mu) == pytest.approx(ss.poisson.logpmf(y, mu), rel=1e-9, abs=1e-9)
    ref = ss.nbinom.logpmf(y, theta, theta / (theta + mu))
    assert negbin_logpmf(y, mu, theta) == pytest.approx(ref, rel=1e-8, abs=1e-8)


def test_negbin_tends_to_poisson():
    y = np.arange(0, 60)
    mu = np.full(y.shape, 12.5)
    diff = negbin_logpmf(y, mu, 1e8) - poisson_logpmf(y, mu)
    assert np.max(np.abs(diff)) < 1e-3


def _model(ll, k, n):
    return FittedModel(FamilySpec(), ("intercept",), np.zeros(1), ll, n, k, True, 1)


def test_information_criteria_examples():
    ic = information_criteria(_model(-2.0, 1, 2))
    assert ic["aic"] == pytest.approx(6.0)
    assert information_criteria(_model(-2.0, 1, 2), standardized=True)["aic"] == pytest.approx(3.0)
    ic = information_criteria(_model(-100.0, 5, 1000))
    assert ic["aic"] == pytest.approx(210.0)
    assert ic["bic"] == pytest.approx(5 * math.log(1000) + 200, abs=1e-9)


def test_noise_column_never_decreases_likelihood(rng):
    X, y = _poisson_data(rng, n=1500)
    small = fit_glm(X, y)
    big = fit_glm(np.column_stack([X, rng.normal(size=len(y))]), y)
    assert big.log_likelihood >= small.log_likelihood - 1e-6
    a_small, a_big = information_criteria(small)["aic"], information_criteria(big)["aic"]
    assert a_big - a_small == pytest.approx(2.0 - 2.0 * (big.log_likelihood - small.log_likelihood))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_nested_likelihood_property(seed):
    r = np.random.default_rng(seed)
    n = 400
    X = np.column_stack([np.ones(n), r.uniform(size=n), r.normal(size=n)])
    y = r.poisson(np.exp(0.5 + 0.3 * X[:, 1]))
    assert fit_glm(X, y).log_likelihood >= fit_glm(X[:, :2], y).log_likelihood - 1e-6


def test_collinear_column_is_dropped(rng):
    X, y = _poisson_data(rng, n=500)
    X3 = np.column_stack([X, 2.0 * X[:, 1]])
    m = fit_glm(X3, y, column_names=["intercept", "x", "x2"])
    assert m.column_names == ("intercept", "x")
    assert m.dropped_columns == ("x2",)
    assert any("collinear" in w for w in m.warnings)


def test_nonconvergence_is_flagged_not_raised():
    from countcast.glm import FitControls

    X = np.column_stack([np.ones(50), np.arange(50.0)])
    y = np.zeros(50, dtype=int)
    y[-1] = 3
    m = fit_glm(X, y, controls=FitControls(max_iter=1))
    assert not m.converged


def test_predict_mean_examples():
    m = FittedModel(FamilySpec(), ("intercept",), np.array([0.0]), 0.0, 1, 1, True, 1)
    assert predict_mean(m, [1.0]) == 1.0
    m5 = FittedModel(FamilySpec(), ("intercept", "x"), np.array([math.log(5), 0.0]), 0.0, 1, 2, True, 1)
    assert predict_mean(m5, [1.0, 3.0]) == pytest.approx(5.0)
    big = FittedModel(FamilySpec(), ("intercept",), np.array([710.0]), 0.0, 1, 1, True, 1)
    with pytest.raises(MeanOverflowError):
        predict_mean(big, [1.0])


def test_sampler_moments():
    rng = np.random.default_rng(3)
    assert np.all(sample_response(FamilySpec(), np.zeros(1000), rng) == 0)
    draws = sample_response(FamilySpec(), np.full(10**6, 10.0), rng)
    assert abs(draws.mean() - 10) / 10 < 0.01
    nb = sample_response(FamilySpec("negbin", 5.0), np.full(10**6, 10.0), rng)
    assert abs(nb.var() - 30.0) / 30.0 < 0.05
    assert isinstance(sample_response(FamilySpec(), 2.0, rng), int)


def test_model_json_roundtrip(rng):
    X, y = _poisson_data(rng, n=300)
    m = fit_glm(X, y, "negbin", column_names=["intercept", "tod_s1"])
    back = FittedModel.from_json(m.to_json())
    np.testing.assert_array_equal(back.beta, m.beta)
    assert back.theta == m.theta and back.column_names == m.column_names
    assert log_likelihood(back, X, y) == pytest.approx(m.log_likelihood)


def test_family_validation():
    with pytest.raises(ValueError):
        FamilySpec("gaussian")
    with pytest.raises(ValueError):
        FamilySpec("negbin", theta=-1.0)
    with pytest.raises(ValueError):
        fit_glm(np.ones((3, 1)), [1, -1, 2])
