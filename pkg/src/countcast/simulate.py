"""Monte Carlo forecast paths with time-varying damping.

Each future hour draws ``Y ~ family(mu)`` with ``mu = exp(beta . z)``. Calendar
and growth covariates are known in advance; lag covariates are read from the
observed tail followed by the already simulated values. With damping on, a
draw outside the admissible interval of its hour-of-week bucket is replaced by
the nearest bound before it is used as a lag.

Path ``k`` draws from ``PCG64(SeedSequence([seed, k]))``, so a path does not
depend on how many other paths are simulated alongside it.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .bounds import DampingBounds
from .calendar import calendar_arrays
from .design import FeatureConfig, deterministic_column, parse_column
from .glm import MAX_POISSON_RATE, FittedModel
from .series import HOUR, CountSeries

RNG_NAME = "numpy.random.PCG64(SeedSequence([seed, path_index]))"
DAMPING_WARN_RATE = 0.20


class ExplosivePathError(RuntimeError):
    def __init__(self, step: int, path_index: int, detail: str = ""):
        msg = f"path {path_index} exploded at step {step}"
        super().__init__(msg + (f": {detail}" if detail else ""))
        self.step = step
        self.path_index = path_index


class DampingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    horizon: int
    n_paths: int = 1
    seed: int = 0
    damping_enabled: bool = True
    bounds: DampingBounds | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least one hour")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a non-negative 64-bit integer")
        if self.damping_enabled and self.bounds is None:
            raise ValueError("damping needs bounds")


@dataclass
class SimulatedPath:
    path_index: int
    timestamps: pd.DatetimeIndex = field(repr=False)
    values: np.ndarray = field(repr=False)
    damped_low: np.ndarray = field(repr=False)
    damped_high: np.ndarray = field(repr=False)
    overflow_events: int = 0

    @property
    def n_damped(self) -> int:
        return int(self.damped_low.sum() + self.damped_high.sum())


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, path_index])))


class _Plan:
    """Model terms split into a precomputed calendar part and per-step lag terms."""

    def __init__(self, model: FittedModel, tail: CountSeries, horizon: int):
        features = model.features or FeatureConfig()
        self.timestamps = pd.date_range(tail.end + HOUR, periods=horizon, freq="h")
        cal = calendar_arrays(self.timestamps)
        self.buckets = cal.hour_of_week
        eta = np.zeros(horizon)
        lags, lag_beta, wins, win_beta = [], [], [], []
        for name, b in zip(model.column_names, model.beta):
            info = parse_column(name)
            if info.group == "lags":
                lags.append(info.order)
                lag_beta.append(b)
            elif info.group == "avglag":
                wins.append(info.order)
                win_beta.append(b)
            else:
                eta += b * deterministic_column(info, cal, self.timestamps, features)
        self.eta_det = eta
        self.lags = np.array(lags, dtype=np.int64)
        self.lag_beta = np.array(lag_beta)
        self.wins = np.array(wins, dtype=np.int64)
        self.win_beta = np.array(win_beta)
        self.need = int(max(lags + wins, default=0))
        if len(tail) < self.need:
            raise ValueError(f"observed tail has {len(tail)} values, the model needs {self.need}")
        self.history = tail.values[len(tail) - self.need :].astype(float)
        self.features = features

    @property
    def dynamic(self) -> bool:
        return self.need > 0


def simulate_path(model: FittedModel, series_tail: CountSeries, config: SimulationConfig, path_index: int = 0) -> SimulatedPath:
    plan = _Plan(model, series_tail, config.horizon)
    return _simulate(model, plan, config, path_index)


def _limits(config: SimulationConfig, buckets: np.ndarray):
    if not config.damping_enabled:
        return None, None
    lo, hi = config.bounds.integer_limits()
    return lo[buckets], hi[buckets]


def _simulate(model: FittedModel, plan: _Plan, config: SimulationConfig, path_index: int) -> SimulatedPath:
    rng = path_rng(config.seed, path_index)
    family = model.family
    horizon = config.horizon
    lo, hi = _limits(config, plan.buckets)
    if plan.dynamic:
        values, low, high, overflow = _simulate_dynamic(model, plan, config, path_index, rng, lo, hi)
    else:
        eta = plan.eta_det
        bad = ~(eta <= math.log(MAX_POISSON_RATE))
        if bad.any() and not config.damping_enabled:
            step = int(np.argmax(bad))
            raise ExplosivePathError(step, path_index, f"linear predictor {eta[step]:g}")
        mu = np.exp(np.where(bad, 0.0, eta))
        lam = rng.gamma(family.theta, mu / family.theta) if family.is_negbin else mu
        big = lam > MAX_POISSON_RATE
        if big.any() and not config.damping_enabled:
            raise ExplosivePathError(int(np.argmax(big)), path_index, "Poisson rate overflow")
        bad |= big
        values = rng.poisson(np.where(bad, 0.0, lam)).astype(np.int64)
        low = np.zeros(horizon, dtype=bool)
        high = np.zeros(horizon, dtype=bool)
        overflow = int(bad.sum())
        if config.damping_enabled:
            high = (values > hi) | bad
            low = (values < lo) & ~high
            values = np.where(high, hi, np.where(low, lo, values))
    return SimulatedPath(path_index, plan.timestamps, np.asarray(values, dtype=np.int64), low, high, overflow)


def _simulate_dynamic(model, plan: _Plan, config: SimulationConfig, path_index, rng, lo, hi):
    horizon, need = config.horizon, plan.need
    theta = model.family.theta if model.family.is_negbin else None
    damping = config.damping_enabled
    buf = np.empty(need + horizon)
    buf[:need] = plan.history
    csum = np.zeros(need + horizon + 1)
    csum[1 : need + 1] = np.cumsum(plan.history)
    values = np.empty(horizon, dtype=np.int64)
    low = np.zeros(horizon, dtype=bool)
    high = np.zeros(horizon, dtype=bool)
    overflow = 0
    lags, lag_beta, wins, win_beta = plan.lags, plan.lag_beta, plan.wins, plan.win_beta
    transform = plan.features.lag_transform
    offset = plan.features.lag_offset
    eta_det = plan.eta_det
    log_max_rate = math.log(MAX_POISSON_RATE)
    for t in range(horizon):
        pos = need + t
        eta = eta_det[t]
        if lags.size:
            x = buf[pos - lags]
            if transform:
                x = np.log(offset + x)
            eta += float(lag_beta @ x)
        if wins.size:
            eta += float(win_beta @ ((csum[pos] - csum[pos - wins]) / wins))
        if not eta <= log_max_rate:
            if not damping:
                raise ExplosivePathError(t, path_index, f"linear predictor {eta:g}")
            y = int(hi[t])
            high[t] = True
            overflow += 1
        else:
            mu = math.exp(eta)
            lam = rng.gamma(theta, mu / theta) if theta is not None else mu
            if lam > MAX_POISSON_RATE:
                if not damping:
                    raise ExplosivePathError(t, path_index, "Poisson rate overflow")
                y = int(hi[t])
                high[t] = True
                overflow += 1
            else:
                y = int(rng.poisson(lam))
                if damping:
                    if y > hi[t]:
                        y = int(hi[t])
                        high[t] = True
                    elif y < lo[t]:
                        y = int(lo[t])
                        low[t] = True
        values[t] = y
        buf[pos] = y
        csum[pos + 1] = csum[pos] + y
    return values, low, high, overflow


@dataclass
class EnsembleResult:
    paths: list[SimulatedPath]
    mean: np.ndarray = field(repr=False)
    damping_rate: float
    overflow_events: int
    warnings: list[str] = field(default_factory=list)

    @property
    def timestamps(self) -> pd.DatetimeIndex:
        return self.paths[0].timestamps

    def values_matrix(self) -> np.ndarray:
        return np.vstack([p.values for p in self.paths])

    def to_frame(self) -> pd.DataFrame:
        frames = [
            pd.DataFrame(
                {
                    "timestamp": p.timestamps.strftime("%Y-%m-%dT%H:%M"),
                    "path_index": p.path_index,
                    "value": p.values,
                    "damped_low": p.damped_low.astype(int),
                    "damped_high": p.damped_high.astype(int),
                }
            )
            for p in self.paths
        ]
        return pd.concat(frames, ignore_index=True)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")


def damping_warning(rate: float) -> str | None:
    if rate > DAMPING_WARN_RATE:
        return f"damping rate {rate:.1%} exceeds {DAMPING_WARN_RATE:.0%}; the model is not trustworthy for simulation"
    return None


def simulate_ensemble(model: FittedModel, series_tail: CountSeries, config: SimulationConfig, threads: int = 1) -> EnsembleResult:
    plan = _Plan(model, series_tail, config.horizon)
    idx = range(config.n_paths)
    if threads > 1 and config.n_paths > 1:
        with ThreadPoolExecutor(threads) as pool:
            paths = list(pool.map(lambda k: _simulate(model, plan, config, k), idx))
    else:
        paths = [_simulate(model, plan, config, k) for k in idx]
    mat = np.vstack([p.values for p in paths]).astype(float)
    n_flagged = sum(p.n_damped for p in paths)
    rate = n_flagged / (config.n_paths * config.horizon)
    result = EnsembleResult(paths, mat.mean(axis=0), rate, sum(p.overflow_events for p in paths))
    msg = damping_warning(rate)
    if msg:
        result.warnings.append(msg)
        warnings.warn(msg, DampingWarning, stacklevel=2)
    return result
