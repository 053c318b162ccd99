from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from .calendar import HOURS_PER_WEEK, hour_of_week_of


@dataclass(frozen=True)
class EvaluationReport:
    mae: float
    rmse: float
    correlation: float | None  # None when either sequence is constant
    n_compared: int
    damping_rate: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def pearson(a, b) -> float | None:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0.0:
        return None
    return float(np.clip((da @ db) / denom, -1.0, 1.0))


def evaluate(predicted, observed, damping_rate: float | None = None) -> EvaluationReport:
    p = np.asarray(predicted, dtype=float)
    o = np.asarray(observed, dtype=float)
    if p.shape != o.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {o.shape}")
    if p.size < 2:
        raise ValueError("need at least two points to evaluate")
    err = p - o
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err**2)))
    # rmse >= mae holds exactly; guard against the last-ulp rounding of sqrt
    return EvaluationReport(mae, max(rmse, mae), pearson(p, o), int(p.size), damping_rate)


def per_path_summary(paths_matrix, observed) -> dict[str, dict[str, float]]:
    """Mean and sd across paths of each path's mae, rmse and correlation."""
    reports = [evaluate(row, observed) for row in np.atleast_2d(paths_matrix)]
    out = {}
    for key in ("mae", "rmse", "correlation"):
        vals = np.array([getattr(r, key) for r in reports if getattr(r, key) is not None], dtype=float)
        out[key] = {
            "mean": float(vals.mean()) if vals.size else None,
            "sd": float(vals.std(ddof=1)) if vals.size > 1 else None,
        }
    return out


def hour_of_week_profile(timestamps, values, min_count: int = 2) -> pd.DataFrame:
    """Per hour-of-week bucket sample mean and sd (``ddof=1``).

    ``values`` may be a 1-d series aligned with ``timestamps`` or a
    ``(n_paths, len(timestamps))`` matrix, in which case all paths are pooled.
    """
    vals = np.asarray(values, dtype=float)
    buckets = hour_of_week_of(timestamps)
    if vals.ndim == 2:
        buckets = np.tile(buckets, vals.shape[0])
        vals = vals.ravel()
    if len(vals) != len(buckets):
        raise ValueError("values and timestamps are not aligned")
    df = pd.DataFrame({"hour_of_week": buckets, "value": vals})
    g = df.groupby("hour_of_week")["value"]
    prof = pd.DataFrame({"mean": g.mean(), "sd": g.std(ddof=1), "n": g.size()})
    prof = prof.reindex(range(HOURS_PER_WEEK))
    prof.index.name = "hour_of_week"
    small = prof.index[~(prof["n"].fillna(0) >= min_count)]
    if len(small):
        raise ValueError(f"hour-of-week bucket {small[0]} has fewer than {min_count} observations")
    prof["n"] = prof["n"].astype(int)
    return prof.reset_index()


def periodic_averages(timestamps, values, period: str = "weekly") -> pd.DataFrame:
    """Mean count per hour in each calendar week (Sunday start) or year.

    Periods not fully covered by the data are flagged ``partial``.
    """
    ts = pd.DatetimeIndex(timestamps)
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 2:
        vals = vals.mean(axis=0)
    if len(ts) == 0 or len(ts) != len(vals):
        raise ValueError("need a non-empty aligned series")
    if period == "weekly":
        days_since_sunday = (ts.weekday + 1) % 7
        starts = ts.normalize() - pd.to_timedelta(days_since_sunday, unit="D")
        full = 168
        expected = np.full(len(ts), full)
    elif period == "annual":
        starts = pd.DatetimeIndex(pd.to_datetime({"year": ts.year, "month": 1, "day": 1}))
        expected = np.where(ts.is_leap_year, 366 * 24, 365 * 24)
    else:
        raise ValueError("period must be 'weekly' or 'annual'")
    df = pd.DataFrame({"period_start": starts, "value": vals, "expected": expected})
    g = df.groupby("period_start")
    out = pd.DataFrame({"mean": g["value"].mean(), "n_hours": g.size(), "expected": g["expected"].first()})
    out["partial"] = out["n_hours"] < out["expected"]
    return out.drop(columns="expected").reset_index()
