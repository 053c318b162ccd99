"""Covariate construction for the conditional count regression.

Every covariate has a stable string name:

===============  ==========================================================
``intercept``    constant 1, always the first column
``tod_s{k}``     ``sin(k * 2pi/24 * d)``; ``tod_c{k}`` the cosine
``todwd_s{k}``   as ``tod_s{k}`` on Saturday/Sunday, 0 on weekdays
``tow_s{k}``     ``sin(k * 2pi/7 * w)``
``toy_s{k}``     ``sin(k * 2pi/L * a)`` with ``L`` the length of the year
``growth_*``     one of ``t, t2, t3, sqrt, cbrt`` of the rescaled time index
``lag_{i}``      ``f(y(t-i))``, ``f(y) = log(offset + y)`` or identity
``avglag_{j}``   mean of ``y(t-1) .. y(t-j)``
===============  ==========================================================
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .calendar import CalendarArrays, CalendarFields, calendar_arrays
from .series import HOUR, CountSeries

INTERCEPT = "intercept"

FOURIER_SCALES = {
    # group name -> column prefix
    "tod": "tod",
    "tod_wd": "todwd",
    "tow": "tow",
    "toy": "toy",
}
SCALE_ALIASES = {"daily": "tod", "weekend_daily": "tod_wd", "weekly": "tow", "annual": "toy"}

GROWTH_FUNCS = {
    "t": lambda t: t,
    "t2": lambda t: t**2,
    "t3": lambda t: t**3,
    "sqrt": np.sqrt,
    "cbrt": np.cbrt,
}

_GROUP_RANK = {"intercept": 0, "tod": 1, "tod_wd": 2, "tow": 3, "toy": 4, "growth": 5, "lags": 6, "avglag": 7}

_FOURIER_RE = re.compile(r"^(tod|todwd|tow|toy)_([sc])([1-9][0-9]*)$")
_LAG_RE = re.compile(r"^lag_([1-9][0-9]*)$")
_AVGLAG_RE = re.compile(r"^avglag_([1-9][0-9]*)$")
_GROWTH_RE = re.compile(r"^growth_(t|t2|t3|sqrt|cbrt)$")


class UnknownColumnError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    group: str
    order: int = 0
    trig: str = ""
    growth: str = ""

    @property
    def history(self) -> int:
        """Number of past observations the column needs."""
        return self.order if self.group in ("lags", "avglag") else 0

    @property
    def is_dynamic(self) -> bool:
        return self.group in ("lags", "avglag")

    def sort_key(self):
        growth_rank = list(GROWTH_FUNCS).index(self.growth) if self.growth else 0
        return (_GROUP_RANK[self.group], self.order, self.trig == "c", growth_rank)


def parse_column(name: str) -> ColumnInfo:
    if name == INTERCEPT:
        return ColumnInfo(name, "intercept")
    m = _FOURIER_RE.match(name)
    if m:
        group = {v: k for k, v in FOURIER_SCALES.items()}[m.group(1)]
        return ColumnInfo(name, group, order=int(m.group(3)), trig=m.group(2))
    m = _LAG_RE.match(name)
    if m:
        return ColumnInfo(name, "lags", order=int(m.group(1)))
    m = _AVGLAG_RE.match(name)
    if m:
        return ColumnInfo(name, "avglag", order=int(m.group(1)))
    m = _GROWTH_RE.match(name)
    if m:
        return ColumnInfo(name, "growth", growth=m.group(1))
    raise UnknownColumnError(f"unknown column name {name!r}")


def order_columns(names: Iterable[str]) -> list[str]:
    """Deduplicate and sort names into canonical design order (intercept excluded)."""
    infos = {n: parse_column(n) for n in names if n != INTERCEPT}
    return sorted(infos, key=lambda n: infos[n].sort_key())


def required_history(names: Iterable[str]) -> int:
    return max((parse_column(n).history for n in names), default=0)


def fourier_names(group: str, max_order: int) -> list[str]:
    prefix = FOURIER_SCALES[SCALE_ALIASES.get(group, group)]
    return [f"{prefix}_{t}{k}" for k in range(1, max_order + 1) for t in "sc"]


# -- specs -------------------------------------------------------------------


@dataclass(frozen=True)
class FourierSpec:
    scale: str
    max_order: int = 10

    def __post_init__(self):
        if self.scale not in SCALE_ALIASES and self.scale not in FOURIER_SCALES:
            raise ValueError(f"unknown Fourier scale {self.scale!r}")
        if self.max_order < 1:
            raise ValueError("Fourier order must be >= 1")

    @property
    def group(self) -> str:
        return SCALE_ALIASES.get(self.scale, self.scale)


@dataclass(frozen=True)
class LagSpec:
    lag_orders: tuple[int, ...] = tuple(range(1, 11))
    transform_enabled: bool = True
    transform_offset: float = 0.1

    def __post_init__(self):
        check_offset(self.transform_offset)


@dataclass(frozen=True)
class AvgLagSpec:
    windows: tuple[int, ...] = (5, 10, 15, 24, 48)


@dataclass(frozen=True)
class GrowthSpec:
    candidate: str | None = None
    scale: float = 1.0  # hours mapped to rescaled t = 1

    def __post_init__(self):
        if self.candidate is not None and self.candidate not in GROWTH_FUNCS:
            raise ValueError(f"unknown growth candidate {self.candidate!r}")
        if self.scale <= 0:
            raise ValueError("growth scale must be positive")


def check_offset(offset: float) -> None:
    if not offset > 0 or not math.isfinite(offset):
        raise ValueError("lag transform offset must be a positive finite number")
    if offset < 0.1 or offset > 1.0:
        warnings.warn(
            f"lag transform offset {offset} is outside the recommended range [0.1, 1]",
            stacklevel=3,
        )


@dataclass(frozen=True)
class FeatureConfig:
    """Settings shared by fitting and simulation.

    ``growth_origin`` and ``growth_scale`` pin the rescaled time index so that
    the training window maps to ``[0, 1)``; they are filled in from the
    training series before fitting.
    """

    lag_transform: bool = True
    lag_offset: float = 0.1
    growth_origin: pd.Timestamp | None = None
    growth_scale: float | None = None

    def __post_init__(self):
        check_offset(self.lag_offset)
        if self.growth_origin is not None:
            object.__setattr__(self, "growth_origin", pd.Timestamp(self.growth_origin))

    def anchored(self, training: CountSeries) -> "FeatureConfig":
        return replace(self, growth_origin=training.start, growth_scale=float(len(training)))

    def lag_transform_fn(self, y):
        y = np.asarray(y, dtype=float)
        return np.log(self.lag_offset + y) if self.lag_transform else y

    def to_dict(self) -> dict:
        return {
            "lag_transform": self.lag_transform,
            "lag_offset": self.lag_offset,
            "growth_origin": None if self.growth_origin is None else self.growth_origin.isoformat(),
            "growth_scale": self.growth_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(
            lag_transform=bool(d["lag_transform"]),
            lag_offset=float(d["lag_offset"]),
            growth_origin=d.get("growth_origin"),
            growth_scale=d.get("growth_scale"),
        )


# -- single-row feature functions -------------------------------------------


def fourier_features(fields: CalendarFields, spec: FourierSpec) -> np.ndarray:
    """``(sin, cos)`` pairs at orders ``1..K``, interleaved ``s1, c1, s2, c2, ...``."""
    group = spec.group
    out = np.zeros(2 * spec.max_order)
    if group == "tod_wd" and not fields.is_weekend:
        return out
    if group in ("tod", "tod_wd"):
        x, omega = fields.d, 2 * np.pi / 24
    elif group == "tow":
        x, omega = fields.w, 2 * np.pi / 7
    else:
        x, omega = fields.a, 2 * np.pi / fields.year_length
    k = np.arange(1, spec.max_order + 1)
    out[0::2] = np.sin(k * omega * x)
    out[1::2] = np.cos(k * omega * x)
    return out


def _check_history(history: np.ndarray, need: int) -> None:
    if len(history) < need:
        raise ValueError(f"need at least {need} past values, got {len(history)}")


def lag_features(history: Sequence[float], spec: LagSpec) -> np.ndarray:
    """Lagged values ``y(t-i)`` for ``i`` in ``spec.lag_orders``; ``history[-1]`` is ``y(t-1)``."""
    history = np.asarray(history, dtype=float)
    _check_history(history, max(spec.lag_orders, default=0))
    raw = np.array([history[-i] for i in spec.lag_orders])
    if spec.transform_enabled:
        return np.log(spec.transform_offset + raw)
    return raw


def avg_lag_features(history: Sequence[float], spec: AvgLagSpec) -> np.ndarray:
    history = np.asarray(history, dtype=float)
    _check_history(history, max(spec.windows, default=0))
    return np.array([history[-j:].mean() for j in spec.windows])


def growth_features(t_index: float, spec: GrowthSpec) -> np.ndarray:
    if t_index < 0:
        raise ValueError("time index must be non-negative")
    if spec.candidate is None:
        return np.empty(0)
    return np.array([float(GROWTH_FUNCS[spec.candidate](t_index / spec.scale))])


# -- whole-series columns ----------------------------------------------------


def deterministic_column(info: ColumnInfo, cal: CalendarArrays, timestamps, features: FeatureConfig) -> np.ndarray:
    """Value of a calendar or growth column at each timestamp."""
    if info.group == "intercept":
        return np.ones(len(cal))
    if info.group in FOURIER_SCALES:
        if info.group in ("tod", "tod_wd"):
            x = cal.d * (2 * np.pi / 24)
        elif info.group == "tow":
            x = cal.w * (2 * np.pi / 7)
        else:
            x = cal.a * (2 * np.pi) / cal.year_length
        trig = np.sin if info.trig == "s" else np.cos
        col = trig(info.order * x)
        if info.group == "tod_wd":
            col = np.where(cal.is_weekend, col, 0.0)
        return col
    if info.group == "growth":
        if features.growth_origin is None or features.growth_scale is None:
            raise ValueError("growth columns need an anchored FeatureConfig")
        t = (pd.DatetimeIndex(timestamps) - features.growth_origin) / HOUR
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("growth index is negative before the time origin")
        return GROWTH_FUNCS[info.growth](t / features.growth_scale)
    raise ValueError(f"{info.name} is not a deterministic column")


def dynamic_column(info: ColumnInfo, values: np.ndarray, features: FeatureConfig) -> np.ndarray:
    """Lag/avglag column over a whole series; entries without enough history are NaN."""
    n = len(values)
    y = values.astype(float)
    out = np.full(n, np.nan)
    j = info.order
    if j >= n:
        return out
    if info.group == "lags":
        out[j:] = features.lag_transform_fn(y[:-j])
    else:
        csum = np.concatenate([[0.0], np.cumsum(y)])
        # mean of y[t-j .. t-1]
        out[j:] = (csum[j:n] - csum[: n - j]) / j
    return out


@dataclass
class DesignMatrix:
    column_names: list[str]
    rows: np.ndarray
    dropped_prefix: int
    timestamps: pd.DatetimeIndex = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape


class FeatureLibrary:
    """Column cache over one series, used when many designs share the same data."""

    def __init__(self, series: CountSeries, features: FeatureConfig | None = None):
        self.series = series
        self.features = features or FeatureConfig()
        self.timestamps = series.timestamps
        self._cal = calendar_arrays(self.timestamps)
        self._cache: dict[str, np.ndarray] = {}

    def column(self, name: str) -> np.ndarray:
        col = self._cache.get(name)
        if col is None:
            info = parse_column(name)
            if info.is_dynamic:
                col = dynamic_column(info, self.series.values, self.features)
            else:
                col = deterministic_column(info, self._cal, self.timestamps, self.features)
            col.setflags(write=False)
            self._cache[name] = col
        return col

    def design(self, active_columns: Iterable[str], start_row: int | None = None) -> DesignMatrix:
        """Design matrix over rows ``start_row..`` (default: first row with full history)."""
        names = order_columns(active_columns)
        prefix = required_history(names)
        if start_row is None:
            start_row = prefix
        elif start_row < prefix:
            raise ValueError(f"start row {start_row} precedes required history {prefix}")
        n = len(self.series)
        if n < start_row + 1:
            raise ValueError(f"series of length {n} is too short for a history of {start_row}")
        cols = [np.ones(n - start_row)] + [self.column(c)[start_row:] for c in names]
        rows = np.column_stack(cols)
        if not np.all(np.isfinite(rows)):
            raise ValueError("design matrix has non-finite entries")
        return DesignMatrix([INTERCEPT] + names, rows, start_row, self.timestamps[start_row:])

    def response(self, start_row: int) -> np.ndarray:
        return self.series.values[start_row:]


def assemble_design(series: CountSeries, active_columns: Iterable[str], features: FeatureConfig | None = None) -> DesignMatrix:
    return FeatureLibrary(series, features).design(active_columns)
