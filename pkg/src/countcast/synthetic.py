"""Synthetic hourly count series from a known conditional Poisson model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .calendar import calendar_arrays
from .design import FeatureConfig, deterministic_column, parse_column
from .metrics import hour_of_week_profile
from .series import CountSeries


@dataclass(frozen=True)
class SeasonalGenerator:
    """``mu(t) = exp(level + sum of Fourier terms) + sum_i excitation[i-1] * y(t-i)``.

    ``coefs`` maps column names (``tod_s1``, ``tow_c2``, ...; see
    :mod:`countcast.design`) to weights. A non-empty ``excitation`` adds linear
    self-excitation on past counts; its sum must stay below 1 for stationarity.
    """

    level: float = 3.5
    coefs: dict = field(
        default_factory=lambda: {
            "tod_s1": -0.6, "tod_c1": -0.9, "tod_s2": 0.3, "tod_c2": 0.2, "tod_s3": 0.15,
            "todwd_s1": 0.3, "todwd_c1": 0.4, "todwd_s2": -0.2,
            "tow_s1": 0.1, "tow_c1": -0.08,
            "toy_s1": -0.2, "toy_c1": -0.45, "toy_s2": 0.08,
        }
    )
    excitation: tuple[float, ...] = ()

    def __post_init__(self):
        if any(a < 0 for a in self.excitation) or sum(self.excitation) >= 1:
            raise ValueError("excitation weights must be non-negative and sum to less than 1")

    def seasonal_log_mean(self, timestamps) -> np.ndarray:
        cal = calendar_arrays(timestamps)
        eta = np.full(len(cal), self.level)
        for name, b in self.coefs.items():
            eta += b * deterministic_column(parse_column(name), cal, timestamps, FeatureConfig())
        return eta

    def generate(self, start, hours: int, seed: int = 0, warmup: int = 168) -> CountSeries:
        rng = np.random.default_rng(seed)
        ts = pd.date_range(pd.Timestamp(start) - pd.Timedelta(hours=warmup), periods=hours + warmup, freq="h")
        eta = self.seasonal_log_mean(ts)
        base = np.exp(eta)
        if not self.excitation:
            y = rng.poisson(base)
        else:
            a = np.asarray(self.excitation, dtype=float)
            p = len(a)
            y = np.zeros(len(ts) + p, dtype=np.int64)
            for t in range(len(ts)):
                past = y[t : t + p][::-1]  # y(t-1), ..., y(t-p)
                y[t + p] = rng.poisson(base[t] + float(a @ past))
            y = y[p:]
        return CountSeries(ts[warmup], y[warmup:])

    def profile_sd(self, start, hours: int, replicates: int = 20, seed: int = 1000) -> np.ndarray:
        """Hour-of-week sd of the generator pooled over independent replicates."""
        reps = [self.generate(start, hours, seed + r) for r in range(replicates)]
        prof = hour_of_week_profile(reps[0].timestamps, np.vstack([r.values for r in reps]))
        return prof["sd"].to_numpy()
