"""Fractional calendar coordinates for hourly timestamps.

Three coordinates are attached to every timestamp:

* ``d`` -- time of day in hours, ``[0, 24)``
* ``w`` -- time of week in days, ``[0, 7)`` with 0 at Sunday 00:00
* ``a`` -- time of year in days, ``[0, year_length)``

Timestamps are naive local clock time. No DST handling is done here;
ingestion is expected to deliver a strict hourly grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

HOURS_PER_WEEK = 168


@dataclass(frozen=True)
class CalendarFields:
    d: float
    w: float
    a: float
    hour_of_week: int
    is_weekend: bool
    year_length: int


def _year_length(year: int) -> int:
    leap = year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)
    return 366 if leap else 365


def calendar_fields(timestamp) -> CalendarFields:
    """Return the calendar coordinates of a single timestamp.

    ``timestamp`` may be a ``datetime``, ``pandas.Timestamp`` or an ISO string.
    Timezone-aware values are rejected.

    >>> f = calendar_fields("2018-01-15T12:00")  # Monday
    >>> (f.d, f.w, f.a)
    (12.0, 1.5, 14.5)
    """
    try:
        ts = pd.Timestamp(timestamp)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"invalid timestamp: {timestamp!r}") from exc
    if ts is pd.NaT or pd.isna(ts):
        raise ValueError(f"invalid timestamp: {timestamp!r}")
    if ts.tzinfo is not None:
        raise ValueError("timestamps must be naive local time")

    d = ts.hour + ts.minute / 60.0 + ts.second / 3600.0
    # python weekday(): Monday=0 .. Sunday=6
    dow = (ts.weekday() + 1) % 7
    w = dow + d / 24.0
    a = (ts.dayofyear - 1) + d / 24.0
    how = hour_of_week_index(w)
    return CalendarFields(
        d=d,
        w=w,
        a=a,
        hour_of_week=how,
        is_weekend=dow in (0, 6),
        year_length=_year_length(ts.year),
    )


def hour_of_week_index(fields_or_w) -> int:
    """Bucket index ``floor(24 * w)`` in ``[0, 167]``."""
    w = fields_or_w.w if isinstance(fields_or_w, CalendarFields) else float(fields_or_w)
    return min(int(np.floor(24.0 * w)), HOURS_PER_WEEK - 1)


@dataclass(frozen=True)
class CalendarArrays:
    """Vectorised counterpart of :class:`CalendarFields` for a timestamp index."""

    d: np.ndarray
    w: np.ndarray
    a: np.ndarray
    hour_of_week: np.ndarray
    is_weekend: np.ndarray
    year_length: np.ndarray

    def __len__(self) -> int:
        return len(self.d)


def calendar_arrays(index) -> CalendarArrays:
    idx = pd.DatetimeIndex(index)
    if idx.tz is not None:
        raise ValueError("timestamps must be naive local time")
    d = (idx.hour + idx.minute / 60.0 + idx.second / 3600.0).to_numpy(dtype=float)
    dow = ((idx.weekday + 1) % 7).to_numpy()
    w = dow + d / 24.0
    a = (idx.dayofyear - 1).to_numpy(dtype=float) + d / 24.0
    how = np.minimum(np.floor(24.0 * w).astype(np.int64), HOURS_PER_WEEK - 1)
    year_length = np.where(idx.is_leap_year, 366, 365).astype(np.int64)
    return CalendarArrays(
        d=d,
        w=w,
        a=a,
        hour_of_week=how,
        is_weekend=(dow == 0) | (dow == 6),
        year_length=year_length,
    )


def hour_of_week_of(index) -> np.ndarray:
    return calendar_arrays(index).hour_of_week

