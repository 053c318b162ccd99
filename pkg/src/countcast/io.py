"""File formats, ingestion and run configuration.

Counts file::

    timestamp,count
    2011-01-01T00:00,16

Timestamps are local clock hours written as ``YYYY-MM-DDTHH:00`` with no
offset suffix.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .series import CountSeries

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M"
OUT_DIR_ENV = "COUNTCAST_OUT_DIR"


class InputError(ValueError):
    """Bad input data or configuration (CLI exit status 1)."""


class GapError(InputError):
    def __init__(self, timestamp: pd.Timestamp):
        super().__init__(f"missing hour {timestamp.strftime(TIMESTAMP_FORMAT)} in counts series")
        self.timestamp = timestamp


def format_timestamps(index) -> pd.Index:
    return pd.DatetimeIndex(index).strftime(TIMESTAMP_FORMAT)


# -- counts ------------------------------------------------------------------


@dataclass
class IngestSummary:
    rows: int
    skipped: int = 0
    skipped_lines: list[int] = field(default_factory=list)
    hours: int = 0
    total_count: int = 0

    def __str__(self) -> str:
        s = f"{self.rows} rows -> {self.hours} hours, {self.total_count} trips"
        if self.skipped:
            s += f"; skipped {self.skipped} malformed rows (lines {self.skipped_lines[:10]})"
        return s


def ingest_trips(path, column: str = "Start date", strict: bool = True, time_format: str | None = None) -> tuple[CountSeries, IngestSummary]:
    """Count trip records per clock hour.

    Hours between the first and last trip without any record get a zero.
    Unparseable start times raise (``strict``) or are skipped and reported.
    """
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"cannot read trips file {path}: {exc}") from exc
    if column not in raw.columns:
        raise InputError(f"trips file {path} has no column {column!r}")
    if raw.empty:
        raise InputError(f"trips file {path} has no rows")
    parsed = pd.to_datetime(raw[column].str.strip(), format=time_format, errors="coerce")
    bad = np.flatnonzero(parsed.isna().to_numpy())
    lines = [int(i) + 2 for i in bad]  # header is line 1
    if len(bad) and strict:
        raise InputError(f"{path}, line {lines[0]}: unparseable start time {raw[column].iloc[bad[0]]!r}")
    good = parsed.dropna()
    if good.empty:
        raise InputError(f"no parseable trips in {path}")
    if getattr(good.dt, "tz", None) is not None:
        good = good.dt.tz_localize(None)
    hours = good.dt.floor("h")
    counts = hours.value_counts().sort_index()
    grid = pd.date_range(counts.index[0], counts.index[-1], freq="h")
    counts = counts.reindex(grid, fill_value=0)
    series = CountSeries(grid[0], counts.to_numpy(dtype=np.int64))
    summary = IngestSummary(len(raw), len(bad), lines, len(series), int(series.values.sum()))
    return series, summary


def load_counts(path, gap_policy: str = "error") -> CountSeries:
    """Read a ``timestamp,count`` file into a gap-free series.

    ``gap_policy="week_fill"`` fills a missing hour with the value 168 hours
    earlier; the default raises :class:`GapError`.
    """
    if gap_policy not in ("error", "week_fill"):
        raise InputError(f"unknown gap policy {gap_policy!r}")
    try:
        df = pd.read_csv(path, dtype={"timestamp": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"cannot read counts file {path}: {exc}") from exc
    if list(df.columns) != ["timestamp", "count"]:
        raise InputError(f"{path}: expected columns timestamp,count, got {','.join(map(str, df.columns))}")
    if df.empty:
        raise InputError(f"{path} has no rows")
    ts = pd.to_datetime(df["timestamp"], format="ISO8601", errors="coerce")
    if ts.isna().any():
        i = int(np.flatnonzero(ts.isna().to_numpy())[0])
        raise InputError(f"{path}, line {i + 2}: bad timestamp {df['timestamp'].iloc[i]!r}")
    counts = pd.to_numeric(df["count"], errors="coerce")
    if counts.isna().any() or np.any(counts != np.round(counts)):
        i = int(np.flatnonzero((counts.isna() | (counts != np.round(counts))).to_numpy())[0])
        raise InputError(f"{path}, line {i + 2}: count is not an integer")
    if np.any(counts < 0):
        i = int(np.flatnonzero((counts < 0).to_numpy())[0])
        raise InputError(f"{path}, line {i + 2}: negative count")
    if np.any(ts != ts.dt.floor("h")):
        raise InputError(f"{path}: timestamps must fall on whole hours")
    if ts.duplicated().any():
        dup = ts[ts.duplicated()].iloc[0]
        raise InputError(f"{path}: duplicate timestamp {dup.strftime(TIMESTAMP_FORMAT)}")
    if not ts.is_monotonic_increasing:
        raise InputError(f"{path}: timestamps are not sorted ascending")

    values = pd.Series(counts.to_numpy(dtype=np.int64), index=pd.DatetimeIndex(ts))
    grid = pd.date_range(values.index[0], values.index[-1], freq="h")
    if len(grid) != len(values):
        missing = grid.difference(values.index)
        if gap_policy == "error":
            raise GapError(missing[0])
        full = values.reindex(grid)
        arr = full.to_numpy(dtype=float)
        for i in np.flatnonzero(np.isnan(arr)):
            if i < 168 or np.isnan(arr[i - 168]):
                raise GapError(grid[i])
            arr[i] = arr[i - 168]
        values = pd.Series(arr.astype(np.int64), index=grid)
    return CountSeries(grid[0], values.to_numpy())


def write_counts(series: CountSeries, path) -> None:
    df = pd.DataFrame({"timestamp": format_timestamps(series.timestamps), "count": series.values})
    df.to_csv(path, index=False, lineterminator="\n")


# -- run configuration -------------------------------------------------------


@dataclass
class RunConfig:
    """Flat run configuration; every key maps to one CLI flag."""

    counts: str | None = None
    gap_policy: str = "error"
    family: str = "poisson"
    criterion: str = "bic"
    scenario: str = "seas_only"
    strategy_tod: str | None = None
    strategy_tod_wd: str | None = None
    strategy_tow: str | None = None
    strategy_toy: str | None = None
    strategy_lags: str | None = None
    strategy_avglag: str | None = None
    fourier_order: int = 10
    n_lags: int = 10
    lag_transform: bool = True
    lag_offset: float = 0.1
    damping: bool = True
    p_r: float = 0.025
    delta_p: float = 0.075
    alpha: float | None = 2.5
    clamp_lower_at_zero: bool = True
    min_bucket_size: int = 30
    bucket_fallback: bool = False
    train_start: str | None = "2011-01-01T00:00"
    test_start: str = "2016-01-01T00:00"
    test_end: str | None = "2019-01-01T00:00"
    horizon: int | None = None
    n_paths: int = 10
    seed: int = 0
    threads: int = 1
    out_dir: str | None = None
    plots: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        from .select import CRITERIA, SCENARIOS, STRATEGIES
        from .glm import FAMILIES

        if self.family not in FAMILIES:
            raise InputError(f"family must be one of {FAMILIES}")
        if self.criterion not in CRITERIA:
            raise InputError(f"criterion must be one of {CRITERIA}")
        if self.scenario not in SCENARIOS:
            raise InputError(f"scenario must be one of {sorted(SCENARIOS)}")
        if self.gap_policy not in ("error", "week_fill"):
            raise InputError("gap_policy must be 'error' or 'week_fill'")
        for g, s in self.strategy_overrides().items():
            if s not in STRATEGIES:
                raise InputError(f"strategy_{g} must be one of {STRATEGIES}")
        for name in ("fourier_order", "n_lags", "n_paths", "min_bucket_size", "threads"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1")
        if self.horizon is not None and self.horizon < 1:
            raise InputError("horizon must be >= 1")
        if self.seed < 0:
            raise InputError("seed must be non-negative")
        for name in ("train_start", "test_start", "test_end"):
            v = getattr(self, name)
            if v is not None:
                try:
                    pd.Timestamp(v)
                except ValueError as exc:
                    raise InputError(f"{name}: bad timestamp {v!r}") from exc

    def strategy_overrides(self) -> dict[str, str]:
        out = {}
        for g in ("tod", "tod_wd", "tow", "toy", "lags", "avglag"):
            v = getattr(self, f"strategy_{g}")
            if v is not None:
                out[g] = v
        return out

    def resolved_out_dir(self) -> Path:
        return Path(self.out_dir or os.environ.get(OUT_DIR_ENV) or "countcast_out")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _field_types() -> dict[str, tuple[type, ...]]:
    out = {}
    for f in dataclasses.fields(RunConfig):
        t = f.type if isinstance(f.type, str) else str(f.type)
        base = t.replace(" | None", "")
        types = {"str": (str,), "int": (int,), "float": (float, int), "bool": (bool,)}[base]
        out[f.name] = types
    return out


def config_schema() -> dict[str, dict[str, Any]]:
    """Key -> ``{"type", "default", "optional"}`` for every config key."""
    schema = {}
    for f in dataclasses.fields(RunConfig):
        t = f.type if isinstance(f.type, str) else str(f.type)
        schema[f.name] = {"type": t.replace(" | None", ""), "default": f.default, "optional": "None" in t}
    return schema


def config_from_mapping(data: dict[str, Any], source: str = "config") -> RunConfig:
    types = _field_types()
    unknown = sorted(set(data) - set(types))
    if unknown:
        raise InputError(f"{source}: unknown keys {unknown}")
    for key, value in data.items():
        ok = types[key]
        if isinstance(value, bool) and bool not in ok:
            raise InputError(f"{source}: {key} must be {ok[0].__name__}, got bool")
        if not isinstance(value, ok):
            raise InputError(f"{source}: {key} must be {ok[0].__name__}, got {type(value).__name__}")
    clean = {k: (float(v) if float in types[k] and not isinstance(v, bool) else v) for k, v in data.items()}
    return RunConfig(**clean)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: {exc}") from exc
    cfg = config_from_mapping(data, str(path))
    if cfg.counts is not None and not os.path.isabs(cfg.counts):
        cfg.counts = str(Path(path).parent / cfg.counts)
    return cfg


# -- report emission ---------------------------------------------------------


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, pd.Timestamp):
        return o.strftime(TIMESTAMP_FORMAT)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _csv(df: pd.DataFrame, path: Path) -> None:
    df.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")


def emit_report(artifacts, out_dir, plots: bool = False) -> list[str]:
    """Write all artifacts of one run to ``out_dir`` and return the file manifest.

    ``artifacts`` is a :class:`countcast.pipeline.RunArtifacts`. Only the
    metadata file carries anything run-specific beyond the inputs, so reruns
    with the same config and seed reproduce every CSV byte for byte.
    """
    from . import metrics as M

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []

    def add(name):
        files.append(name)
        return out / name

    a = artifacts
    _write_json(add("model.json"), a.model.to_dict())
    _write_json(add("trace.json"), a.trace.to_dict())
    if a.bounds is not None:
        a.bounds.write(add("bounds.csv"), add("bounds_meta.json"))
    a.ensemble.to_csv(add("paths.csv"))
    _write_json(add("metrics.json"), a.metrics)
    _csv(pd.DataFrame([a.summary_row()]), add("metrics.csv"))

    sim_ts = a.ensemble.timestamps
    sim = a.ensemble.values_matrix()
    frames = {}
    prof_obs = M.hour_of_week_profile(a.test.timestamps, a.test.values) if a.test is not None else None
    prof_sim = M.hour_of_week_profile(sim_ts, sim)
    prof_train = M.hour_of_week_profile(a.train.timestamps, a.train.values)
    prof = pd.DataFrame({"hour_of_week": prof_sim["hour_of_week"]})
    prof["train_mean"], prof["train_sd"] = prof_train["mean"], prof_train["sd"]
    if prof_obs is not None:
        prof["test_mean"], prof["test_sd"] = prof_obs["mean"], prof_obs["sd"]
    prof["sim_mean"], prof["sim_sd"] = prof_sim["mean"], prof_sim["sd"]
    frames["profile_hour_of_week.csv"] = prof

    for period in ("weekly", "annual"):
        parts = [M.periodic_averages(a.train.timestamps, a.train.values, period).assign(source="train")]
        if a.test is not None:
            parts.append(M.periodic_averages(a.test.timestamps, a.test.values, period).assign(source="test"))
        parts.append(M.periodic_averages(sim_ts, sim, period).assign(source="sim"))
        df = pd.concat(parts, ignore_index=True)
        df["period_start"] = format_timestamps(df["period_start"])
        frames[f"{period}_averages.csv"] = df[["source", "period_start", "mean", "n_hours", "partial"]]

    if a.bounds is not None:
        from .calendar import hour_of_week_of

        how = hour_of_week_of(a.train.timestamps)
        frames["bounds_overlay.csv"] = pd.DataFrame(
            {
                "timestamp": format_timestamps(a.train.timestamps),
                "hour_of_week": how,
                "count": a.train.values,
                "m": a.bounds.lower[how],
                "M": a.bounds.upper[how],
            }
        )
    for name, df in frames.items():
        _csv(df, add(name))

    if plots:
        from .plots import write_plots

        for name in write_plots(frames, out):
            files.append(name)

    _write_json(add("run_meta.json"), a.metadata())
    files.append("manifest.json")
    _write_json(out / "manifest.json", {"files": files})
    return files
