"""Command-line interface.

Exit status: 0 success, 1 input error, 2 model/convergence error,
3 explosive simulated path. Flags override values from ``--config``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from .bounds import DampingBounds, time_varying_bounds
from .glm import FittedModel, ModelFitError
from .io import (
    InputError,
    RunConfig,
    config_from_mapping,
    config_schema,
    emit_report,
    ingest_trips,
    load_config,
    load_counts,
    write_counts,
)
from .select import SelectionError

EXIT_OK, EXIT_INPUT, EXIT_MODEL, EXIT_EXPLOSIVE = 0, 1, 2, 3

log = logging.getLogger("countcast")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML run configuration (flags take precedence)")
    for key, spec in config_schema().items():
        flag = "--" + key.replace("_", "-")
        default = spec["default"]
        desc = f"config key {key} (default: {default})"
        if spec["type"] == "bool":
            p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None, help=desc)
        else:
            typ = {"int": int, "float": float, "str": str}[spec["type"]]
            p.add_argument(flag, dest=key, type=typ, default=None, metavar=spec["type"].upper(), help=desc)


def _run_config(args) -> RunConfig:
    base = load_config(args.config).to_dict() if args.config else {}
    given = {k: getattr(args, k) for k in config_schema() if getattr(args, k, None) is not None}
    base.update(given)
    base = {k: v for k, v in base.items() if v is not None}
    return config_from_mapping(base, "command line")


def _counts(cfg: RunConfig):
    if not cfg.counts:
        raise InputError("no counts file given (--counts or config key counts)")
    return load_counts(cfg.counts, cfg.gap_policy)


def cmd_ingest(args) -> int:
    if args.trips:
        series, summary = ingest_trips(args.trips, args.column, strict=not args.lenient)
        print(f"ingested {args.trips}: {summary}")
    elif args.counts:
        series = load_counts(args.counts, args.gap_policy)
        print(f"{args.counts}: valid hourly grid, {len(series)} hours from {series.start} to {series.end}")
    else:
        raise InputError("ingest needs --trips or --counts")
    if args.out:
        write_counts(series, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _run_one(series, cfg: RunConfig, out_dir: Path) -> dict:
    from .pipeline import run_pipeline

    art = run_pipeline(series, cfg)
    files = emit_report(art, out_dir, plots=cfg.plots)
    for w in art.ensemble.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{cfg.scenario}/{cfg.family}: wrote {len(files)} files to {out_dir}")
    return art.summary_row()


def cmd_run(args) -> int:
    from .pipeline import SUMMARY_COLUMNS, all_scenario_configs, empty_row
    from .simulate import ExplosivePathError

    cfg = _run_config(args)
    series = _counts(cfg)
    out = cfg.resolved_out_dir()
    if not args.all_scenarios:
        _run_one(series, cfg, out)
        return EXIT_OK
    rows, status = [], EXIT_OK
    for sub in all_scenario_configs(cfg):
        try:
            rows.append(_run_one(series, sub, out / f"{sub.scenario}_{sub.family}"))
        except ExplosivePathError as exc:
            print(f"{sub.scenario}/{sub.family}: {exc}", file=sys.stderr)
            rows.append(empty_row(sub))
            status = EXIT_EXPLOSIVE
    out.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(rows, columns=list(SUMMARY_COLUMNS))
    df.to_csv(out / "comparison.csv", index=False, lineterminator="\n", float_format="%.10g")
    print(df.to_string(index=False))
    return status


def cmd_select(args) -> int:
    from .design import FeatureConfig
    from .pipeline import split_series
    from .select import run_diagram, scenario

    cfg = _run_config(args)
    train, _ = split_series(_counts(cfg), cfg)
    diagram = scenario(cfg.scenario, cfg.family, cfg.criterion, cfg.strategy_overrides(),
                       fourier_order=cfg.fourier_order, n_lags=cfg.n_lags)
    features = FeatureConfig(cfg.lag_transform, cfg.lag_offset)
    model, trace = run_diagram(diagram, train, features, threads=cfg.threads)
    out = cfg.resolved_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_text(model.to_json() + "\n")
    (out / "trace.json").write_text(trace.to_json() + "\n")
    print(trace.summary())
    return EXIT_OK


def cmd_bounds(args) -> int:
    from .pipeline import split_series, tail_params

    cfg = _run_config(args)
    train, _ = split_series(_counts(cfg), cfg)
    b = time_varying_bounds(train, tail_params(cfg), cfg.min_bucket_size, cfg.bucket_fallback)
    out = cfg.resolved_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    b.write(out / "bounds.csv", out / "bounds_meta.json")
    print(f"wrote {out / 'bounds.csv'} (global m={b.global_lower:.3f}, M={b.global_upper:.3f})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .pipeline import split_series
    from .simulate import SimulationConfig, simulate_ensemble

    cfg = _run_config(args)
    train, test = split_series(_counts(cfg), cfg)
    model = FittedModel.from_json(Path(args.model).read_text())
    bounds = None
    if cfg.damping:
        csv = Path(args.bounds or Path(args.model).with_name("bounds.csv"))
        bounds = DampingBounds.read(csv, csv.with_name("bounds_meta.json"))
    horizon = cfg.horizon or (len(test) if test is not None else None)
    if horizon is None:
        raise InputError("set horizon")
    ens = simulate_ensemble(model, train, SimulationConfig(horizon, cfg.n_paths, cfg.seed, cfg.damping, bounds), cfg.threads)
    out = cfg.resolved_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    ens.to_csv(out / "paths.csv")
    print(f"wrote {out / 'paths.csv'}; damping rate {ens.damping_rate:.2%}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .metrics import evaluate, per_path_summary
    from .pipeline import split_series

    cfg = _run_config(args)
    _, test = split_series(_counts(cfg), cfg)
    if test is None:
        raise InputError("no test window to compare against")
    paths = pd.read_csv(args.paths)
    mat = paths.pivot(index="path_index", columns="timestamp", values="value").to_numpy(dtype=float)
    obs = test.values[: mat.shape[1]]
    damped = (paths["damped_low"] + paths["damped_high"]).astype(bool).mean()
    report = {
        "ensemble_mean": evaluate(mat.mean(axis=0), obs, float(damped)).to_dict(),
        "per_path": per_path_summary(mat, obs),
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="countcast", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="aggregate trip logs or validate a counts file")
    p.add_argument("--trips", help="raw trip CSV")
    p.add_argument("--column", default="Start date", help="start-time column of the trip CSV (default: %(default)s)")
    p.add_argument("--lenient", action="store_true", help="skip unparseable rows instead of failing")
    p.add_argument("--counts", help="existing timestamp,count CSV")
    p.add_argument("--validate", action="store_true", help="only check the counts grid")
    p.add_argument("--gap-policy", default="error", choices=("error", "week_fill"))
    p.add_argument("--out", help="write the canonical counts CSV here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="full pipeline for one (scenario, family) or all of them")
    p.add_argument("--all-scenarios", action="store_true", help="run every scenario with both families")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("select", help="model selection only; writes model.json and trace.json")
    _add_config_flags(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("bounds", help="hour-of-week damping bounds from the training window")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="simulate paths from a saved model.json")
    p.add_argument("--model", required=True)
    p.add_argument("--bounds", help="bounds.csv (default: next to model.json)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="evaluate a saved paths.csv against the test window")
    p.add_argument("--paths", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    from .simulate import ExplosivePathError

    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ExplosivePathError as exc:
        print(f"explosive path: {exc}", file=sys.stderr)
        return EXIT_EXPLOSIVE
    except (ModelFitError, SelectionError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
