"""Quantile-based variability measures and outlier bounds.

For a sample with quantile function ``q`` the tail variabilities are the
average slopes of ``q`` near the two ends::

    rtv = (q(p_r + dp) - q(p_r)) / dp
    ltv = (q(p_l) - q(p_l - dp)) / dp,      p_l = 1 - p_r

and the admissible interval is ``[q(p_m) - alpha*rtv, q(p_M) + alpha*ltv]``.
Unlike Tukey's fences each side uses the spread of its own tail, which suits
skewed count distributions.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .calendar import HOURS_PER_WEEK, hour_of_week_of
from .series import CountSeries

DEFAULT_P_R = 0.025
DEFAULT_ALPHA = 2.5
DEFAULT_DELTA_P = 0.075
DEFAULT_MIN_BUCKET = 30


def rule_of_thumb_alpha(p_m: float) -> float:
    """``alpha = 10 * p_m``: ten times the slope-extrapolated distance to the extreme."""
    return 10.0 * p_m


@dataclass(frozen=True)
class TailParams:
    """Tail probabilities and multiplier.

    ``p_l``, ``p_m`` and ``p_M`` are tied to ``p_r`` (``p_l = p_M = 1 - p_r``,
    ``p_m = p_r``). Leaving ``alpha`` unset applies :func:`rule_of_thumb_alpha`.
    """

    p_r: float = DEFAULT_P_R
    delta_p: float = DEFAULT_DELTA_P
    alpha: float | None = None
    clamp_lower_at_zero: bool = True

    def __post_init__(self):
        p_r, dp = self.p_r, self.delta_p
        p_l = 1.0 - p_r
        if not (0 < p_r < p_r + dp < 0.5 < p_l - dp < p_l < 1):
            raise ValueError(
                f"tail probabilities must satisfy 0 < p_r < p_r+dp < 0.5 < p_l-dp < p_l < 1 "
                f"(got p_r={p_r}, delta_p={dp})"
            )
        if self.alpha is None:
            object.__setattr__(self, "alpha", rule_of_thumb_alpha(p_r))
        elif not self.alpha >= 0:
            raise ValueError("alpha must be non-negative")

    @classmethod
    def recommended(cls) -> "TailParams":
        return cls(p_r=DEFAULT_P_R, delta_p=DEFAULT_DELTA_P, alpha=DEFAULT_ALPHA)

    @property
    def p_l(self) -> float:
        return 1.0 - self.p_r

    @property
    def p_m(self) -> float:
        return self.p_r

    @property
    def p_M(self) -> float:
        return self.p_l

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(p_l=self.p_l, p_m=self.p_m, p_M=self.p_M)
        return d


def empirical_quantile(sample, p: float) -> float:
    """Linear interpolation between order statistics at position ``h = (n-1) p``."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("quantile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    h = (x.size - 1) * p
    lo = int(math.floor(h))
    if lo >= x.size - 1:
        return float(x[-1])
    return float(x[lo] + (h - lo) * (x[lo + 1] - x[lo]))


def _quantiles(sample, probs) -> list[float]:
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    return [empirical_quantile(x, p) for p in probs]


def tail_variability(sample, params: TailParams) -> dict[str, float]:
    p_r, dp, p_l = params.p_r, params.delta_p, params.p_l
    q_r, q_r2, q_l2, q_l = _quantiles(sample, (p_r, p_r + dp, p_l - dp, p_l))
    return {"rtv": (q_r2 - q_r) / dp, "ltv": (q_l - q_l2) / dp}


def outlier_bounds(sample, params: TailParams | None = None) -> tuple[float, float]:
    params = params or TailParams()
    tv = tail_variability(sample, params)
    q_m, q_M = _quantiles(sample, (params.p_m, params.p_M))
    m = q_m - params.alpha * tv["rtv"]
    M = q_M + params.alpha * tv["ltv"]
    if params.clamp_lower_at_zero:
        m = max(m, 0.0)
    return m, M


def tukey_bounds(sample, k: float = 1.5) -> tuple[float, float]:
    q1, q3 = _quantiles(sample, (0.25, 0.75))
    iqr = q3 - q1
    return q1 - k * iqr, q3 + k * iqr


class BucketSizeError(ValueError):
    def __init__(self, bucket: int, size: int, minimum: int):
        super().__init__(f"hour-of-week bucket {bucket} has {size} observations (< {minimum})")
        self.bucket = bucket


@dataclass(frozen=True)
class DampingBounds:
    lower: np.ndarray = field(repr=False)  # m_h, length 168
    upper: np.ndarray = field(repr=False)  # M_h
    global_lower: float
    global_upper: float
    params: TailParams
    fallback_buckets: tuple[int, ...] = ()

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (HOURS_PER_WEEK,) or hi.shape != (HOURS_PER_WEEK,):
            raise ValueError("bounds need one entry per hour of the week")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def integer_limits(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounds as applied to counts: ``floor(m_h)`` and ``ceil(M_h)``."""
        return np.floor(self.lower).astype(np.int64), np.ceil(self.upper).astype(np.int64)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"hour_of_week": np.arange(HOURS_PER_WEEK), "m": self.lower, "M": self.upper})

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n", float_format="%.10g")

    def metadata(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "global_m": self.global_lower,
            "global_M": self.global_upper,
            "fallback_buckets": list(self.fallback_buckets),
        }

    def write(self, csv_path, meta_path) -> None:
        self.to_csv(csv_path)
        with open(meta_path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def read(cls, csv_path, meta_path) -> "DampingBounds":
        df = pd.read_csv(csv_path)
        if list(df.columns) != ["hour_of_week", "m", "M"] or len(df) != HOURS_PER_WEEK:
            raise ValueError(f"{csv_path} is not a 168-row bounds table")
        with open(meta_path) as fh:
            meta = json.load(fh)
        p = meta["params"]
        params = TailParams(p["p_r"], p["delta_p"], p["alpha"], p["clamp_lower_at_zero"])
        return cls(
            df["m"].to_numpy(), df["M"].to_numpy(), meta["global_m"], meta["global_M"], params,
            tuple(meta.get("fallback_buckets", ())),
        )


def time_varying_bounds(
    training: CountSeries,
    params: TailParams | None = None,
    min_bucket_size: int = DEFAULT_MIN_BUCKET,
    fallback_to_global: bool = False,
) -> DampingBounds:
    """Outlier bounds computed separately for each of the 168 hours of the week.

    Without ``params`` the recommended choice ``p_r = 0.025``, ``alpha = 2.5`` is
    used. Buckets smaller than ``min_bucket_size`` raise
    :class:`BucketSizeError` unless ``fallback_to_global`` is set.
    """
    params = params or TailParams.recommended()
    values = training.values.astype(float)
    buckets = hour_of_week_of(training.timestamps)
    g_lo, g_hi = outlier_bounds(values, params)
    lower = np.empty(HOURS_PER_WEEK)
    upper = np.empty(HOURS_PER_WEEK)
    fallback = []
    order = np.argsort(buckets, kind="stable")
    splits = np.searchsorted(buckets[order], np.arange(HOURS_PER_WEEK + 1))
    for h in range(HOURS_PER_WEEK):
        sample = values[order[splits[h] : splits[h + 1]]]
        if sample.size < min_bucket_size:
            if not fallback_to_global:
                raise BucketSizeError(h, sample.size, min_bucket_size)
            lower[h], upper[h] = g_lo, g_hi
            fallback.append(h)
            continue
        lower[h], upper[h] = outlier_bounds(sample, params)
    return DampingBounds(lower, upper, g_lo, g_hi, params, tuple(fallback))
