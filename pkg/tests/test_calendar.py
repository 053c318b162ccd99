import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from countcast.calendar import calendar_arrays, calendar_fields, hour_of_week_index, hour_of_week_of

hours = st.integers(min_value=0, max_value=24 * 365 * 30)
BASE = pd.Timestamp("2000-01-01")


def test_sunday_midnight_is_week_origin():
    f = calendar_fields("2016-01-03 00:00")  # a Sunday
    assert (f.d, f.w) == (0.0, 0.0)
    assert f.is_weekend
    assert hour_of_week_index(f) == 0


def test_wednesday_noon():
    f = calendar_fields("2016-01-06 12:00")
    assert f.d == 12.0
    assert f.w == pytest.approx(3.5)
    assert not f.is_weekend
    assert hour_of_week_index(f) == 84


def test_saturday_last_hour_is_bucket_167():
    f = calendar_fields("2016-01-09 23:00")
    assert f.is_weekend
    assert hour_of_week_index(f) == 167


def test_year_coordinate_and_leap_years():
    f = calendar_fields("2016-12-31 12:00")
    assert f.year_length == 366
    assert f.a == pytest.approx(365.5)
    assert calendar_fields("2015-03-01").year_length == 365
    assert calendar_fields("2015-01-01 06:00").a == pytest.approx(0.25)


def test_rejects_timezone_aware_and_garbage():
    with pytest.raises(ValueError):
        calendar_fields(pd.Timestamp("2016-01-01", tz="UTC"))
    with pytest.raises(ValueError):
        calendar_fields("not a date")


@given(hours)
def test_scalar_and_vector_agree(h):
    ts = BASE + pd.Timedelta(hours=h)
    f = calendar_fields(ts)
    arr = calendar_arrays(pd.DatetimeIndex([ts]))
    assert arr.d[0] == f.d
    assert arr.w[0] == pytest.approx(f.w, abs=1e-12)
    assert arr.a[0] == pytest.approx(f.a, abs=1e-12)
    assert bool(arr.is_weekend[0]) == f.is_weekend
    assert arr.hour_of_week[0] == hour_of_week_index(f)
    assert 0 <= f.d < 24 and 0 <= f.w < 7 and 0 <= f.a < f.year_length


def test_hour_of_week_cycles_through_all_buckets():
    idx = pd.date_range("2016-01-05 07:00", periods=3 * 168, freq="h")
    how = hour_of_week_of(idx)
    assert set(how) == set(range(168))
    assert np.all(np.diff(how)[how[:-1] != 167] == 1)
