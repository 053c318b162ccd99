import numpy as np
import pandas as pd
import pytest

from countcast.series import CountSeries
from countcast.synthetic import SeasonalGenerator


@pytest.fixture(scope="session")
def seasonal_series():
    """Eight weeks of hourly counts from the default seasonal generator."""
    return SeasonalGenerator(level=2.5).generate("2016-01-03", 8 * 168, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_series(values, start="2016-01-03"):
    return CountSeries(pd.Timestamp(start), np.asarray(values, dtype=np.int64))
