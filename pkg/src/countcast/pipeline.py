"""End-to-end run: split, select, bound, simulate, evaluate."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import __version__
from .bounds import DampingBounds, TailParams, time_varying_bounds
from .design import FeatureConfig, FeatureLibrary
from .glm import FittedModel, FitControls, fitted_mean, information_criteria
from .io import InputError, RunConfig
from .metrics import evaluate, pearson, per_path_summary
from .select import SCENARIOS, SelectionTrace, run_diagram, scenario
from .series import CountSeries
from .simulate import RNG_NAME, EnsembleResult, SimulationConfig, simulate_ensemble

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "scenario", "family", "std_aic", "std_bic", "fit_correlation",
    "damping_pct", "sim_correlation", "mae", "rmse",
)


@dataclass
class RunArtifacts:
    config: RunConfig
    train: CountSeries
    test: CountSeries | None
    model: FittedModel
    trace: SelectionTrace
    bounds: DampingBounds | None
    ensemble: EnsembleResult
    metrics: dict = field(default_factory=dict)

    def summary_row(self) -> dict:
        fit = self.metrics["fit"]
        sim = self.metrics["simulation"]
        ens = sim.get("ensemble_mean") or {}
        return {
            "scenario": self.config.scenario,
            "family": self.config.family,
            "std_aic": fit["std_aic"],
            "std_bic": fit["std_bic"],
            "fit_correlation": fit["fit_correlation"],
            "damping_pct": sim["damping_pct"],
            "sim_correlation": ens.get("correlation"),
            "mae": ens.get("mae"),
            "rmse": ens.get("rmse"),
        }

    def metadata(self) -> dict:
        return {
            "package_version": __version__,
            "rng": RNG_NAME,
            "created_at": pd.Timestamp.now().isoformat(timespec="seconds"),
            "config": self.config.to_dict(),
        }


def split_series(series: CountSeries, config: RunConfig) -> tuple[CountSeries, CountSeries | None]:
    start = series.start if config.train_start is None else pd.Timestamp(config.train_start)
    test_start = pd.Timestamp(config.test_start)
    if start < series.start or test_start <= start:
        raise InputError(
            f"training window [{start}, {test_start}) does not lie inside the series "
            f"[{series.start}, {series.end}]"
        )
    if test_start > series.end + pd.Timedelta(hours=1):
        raise InputError(f"test start {test_start} is past the end of the series ({series.end})")
    try:
        train = series.window(start, test_start)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if test_start > series.end:
        return train, None
    end = None if config.test_end is None else pd.Timestamp(config.test_end)
    if end is not None and end > series.end + pd.Timedelta(hours=1):
        raise InputError(f"test end {end} is past the end of the series ({series.end})")
    test = series.window(test_start, end)
    return train, test


def tail_params(config: RunConfig) -> TailParams:
    try:
        return TailParams(config.p_r, config.delta_p, config.alpha, config.clamp_lower_at_zero)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def fit_correlation(model: FittedModel, train: CountSeries) -> float | None:
    lib = FeatureLibrary(train, model.features)
    design = lib.design(model.column_names)
    return pearson(fitted_mean(model, design), lib.response(design.dropped_prefix))


def run_pipeline(series: CountSeries, config: RunConfig) -> RunArtifacts:
    train, test = split_series(series, config)
    horizon = config.horizon
    if test is None:
        if horizon is None:
            raise InputError("no test window in the series; set horizon")
    else:
        if horizon is None:
            horizon = len(test)
        elif horizon > len(test):
            raise InputError(f"horizon {horizon} exceeds the test window ({len(test)} hours)")
        else:
            test = test.window(None, test.start + pd.Timedelta(hours=horizon))

    diagram = scenario(
        config.scenario, config.family, config.criterion, config.strategy_overrides(),
        fourier_order=config.fourier_order, n_lags=config.n_lags,
    )
    features = FeatureConfig(lag_transform=config.lag_transform, lag_offset=config.lag_offset)
    log.info("selecting %s/%s on %d training hours", config.scenario, config.family, len(train))
    model, trace = run_diagram(diagram, train, features, FitControls(), threads=config.threads)

    bounds = None
    if config.damping:
        bounds = time_varying_bounds(
            train, tail_params(config), config.min_bucket_size, fallback_to_global=config.bucket_fallback
        )
    sim_cfg = SimulationConfig(horizon, config.n_paths, config.seed, config.damping, bounds)
    ensemble = simulate_ensemble(model, train, sim_cfg, threads=config.threads)

    art = RunArtifacts(config, train, test, model, trace, bounds, ensemble)
    art.metrics = build_metrics(art)
    return art


def build_metrics(art: RunArtifacts) -> dict:
    ic = information_criteria(art.model)
    sic = information_criteria(art.model, standardized=True)
    fit = {
        "aic": ic["aic"],
        "bic": ic["bic"],
        "std_aic": sic["aic"],
        "std_bic": sic["bic"],
        "fit_correlation": fit_correlation(art.model, art.train),
        "n_obs": art.model.n_obs,
        "n_params": art.model.n_params,
        "theta": art.model.theta,
        "columns": list(art.model.column_names),
    }
    ens = art.ensemble
    sim = {
        "horizon": len(ens.mean),
        "n_paths": len(ens.paths),
        "seed": art.config.seed,
        "damping_enabled": art.config.damping,
        "damping_rate": ens.damping_rate,
        "damping_pct": 100.0 * ens.damping_rate,
        "overflow_events": ens.overflow_events,
        "warnings": list(ens.warnings),
        "ensemble_mean": None,
        "per_path": None,
    }
    if art.test is not None:
        sim["ensemble_mean"] = evaluate(ens.mean, art.test.values, ens.damping_rate).to_dict()
        sim["per_path"] = per_path_summary(ens.values_matrix(), art.test.values)
    return {"scenario": art.config.scenario, "family": art.config.family, "fit": fit, "simulation": sim}


def all_scenario_configs(config: RunConfig):
    for name in SCENARIOS:
        for family in ("poisson", "negbin"):
            yield config.replace(scenario=name, family=family)


def empty_row(config: RunConfig) -> dict:
    row = {k: np.nan for k in SUMMARY_COLUMNS}
    row.update(scenario=config.scenario, family=config.family)
    return row
