import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from countcast.metrics import evaluate, hour_of_week_profile, per_path_summary, periodic_averages

vectors = st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50)


def test_evaluate_examples():
    r = evaluate([2, 2, 2], [1, 2, 3])
    assert r.mae == pytest.approx(2 / 3)
    assert r.rmse == pytest.approx(math.sqrt(2 / 3))
    assert r.correlation is None
    r = evaluate([1, 4, 2], [1, 4, 2])
    assert (r.mae, r.rmse, r.correlation) == (0.0, 0.0, 1.0)
    obs = np.array([1.0, 5.0, 2.0, 8.0])
    assert evaluate(2 * obs + 5, obs).correlation == pytest.approx(1.0)


@given(vectors, st.randoms())
def test_rmse_dominates_mae_and_permutation_symmetry(xs, rnd):
    p = np.array(xs)
    o = np.roll(p, 1) + 0.5
    r = evaluate(p, o)
    assert r.rmse >= r.mae
    idx = list(range(len(p)))
    rnd.shuffle(idx)
    r2 = evaluate(p[idx], o[idx])
    assert r2.mae == pytest.approx(r.mae) and r2.rmse == pytest.approx(r.rmse)


def test_evaluate_rejects_mismatch():
    with pytest.raises(ValueError):
        evaluate([1, 2], [1, 2, 3])


def test_per_path_summary():
    obs = np.array([1.0, 2.0, 3.0, 4.0])
    paths = np.vstack([obs, obs + 1])
    s = per_path_summary(paths, obs)
    assert s["mae"]["mean"] == pytest.approx(0.5)
    assert s["mae"]["sd"] == pytest.approx(math.sqrt(0.5))


def test_profile_constant_and_two_point():
    ts = pd.date_range("2016-01-03", periods=168 * 4, freq="h")
    prof = hour_of_week_profile(ts, np.full(len(ts), 3.0))
    assert len(prof) == 168 and np.all(prof["mean"] == 3) and np.all(prof["sd"] == 0)

    k = 8
    ts = pd.date_range("2016-01-03", periods=168 * k, freq="h")
    week = np.arange(len(ts)) // 168
    vals = np.where(week % 2 == 0, 0.0, 10.0)
    prof = hour_of_week_profile(ts, vals)
    assert np.allclose(prof["mean"], 5.0)
    # half zeros, half tens: sum of squared deviations 25 k, so var = 25 k / (k - 1)
    assert np.allclose(prof["sd"], math.sqrt(25 * k / (k - 1)))


def test_profile_pooling_identity():
    rng = np.random.default_rng(0)
    ts = pd.date_range("2016-01-03", periods=336, freq="h")
    mat = rng.poisson(4, size=(5, len(ts)))
    pooled = hour_of_week_profile(ts, mat)
    concat_ts = pd.DatetimeIndex(np.tile(ts.values, 5))
    concat = hour_of_week_profile(concat_ts, mat.ravel())
    pd.testing.assert_frame_equal(pooled, concat)


def test_profile_needs_enough_samples():
    ts = pd.date_range("2016-01-03", periods=168, freq="h")
    with pytest.raises(ValueError, match="bucket"):
        hour_of_week_profile(ts, np.ones(168))


def test_weekly_averages():
    ts = pd.date_range("2016-01-03", periods=168, freq="h")
    out = periodic_averages(ts, np.full(168, 4.0))
    assert len(out) == 1 and out["mean"][0] == 4 and not out["partial"][0]
    ts = pd.date_range("2016-01-03", periods=336, freq="h")
    out = periodic_averages(ts, np.r_[np.full(168, 2.0), np.full(168, 6.0)])
    assert list(out["mean"]) == [2.0, 6.0]
    assert out["period_start"][0] == pd.Timestamp("2016-01-03")


def test_annual_averages_increase_for_growth():
    ts = pd.date_range("2014-01-01", "2016-12-31 23:00", freq="h")
    out = periodic_averages(ts, np.arange(len(ts), dtype=float), "annual")
    assert len(out) == 3 and np.all(np.diff(out["mean"]) > 0)
    assert not out["partial"].any()
    part = periodic_averages(ts[:100], np.ones(100), "annual")
    assert part["partial"][0]
