"""Command-line pipeline: synth, fit, forecast, evaluate.

Every command is driven by JSON config files and a single seed, writes its
artifacts into an output directory, and is byte-for-byte reproducible.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import (
    ConfigError,
    DataError,
    LoadcastError,
    NumericalError,
)
from .features import load_calendar, parse_calendar
from .forecast import (
    evaluate_forecast,
    read_forecast_csv,
    two_stage_forecast,
    write_forecast_csv,
    write_metrics_json,
)
from .net import NetConfig, save_net, write_training_log
from .piecewise import (
    BreakpointPlan,
    FutureBreak,
    fit_filter,
    residuals,
    save_model,
)
from .series import (
    DailySeries,
    ExclusionMask,
    read_series_csv,
    split,
    write_series_csv,
)
from .synth import ResidualSpec, SynthParams, generate, write_ground_truth_csv


def _read_json(path: Path, kind: str) -> dict:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{kind} file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {kind} file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None


def _parse_date(value, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: bad date {value!r}") from None


@dataclass(frozen=True)
class RunConfig:
    data: Path
    calendar: Path
    historical_breaks: tuple[dt.date, ...]
    future_breaks: tuple[FutureBreak, ...]
    split: dt.date | None
    horizon: int | None
    net_overrides: dict
    seed: int
    out_dir: Path


def load_run_config(path: Path) -> RunConfig:
    raw = _read_json(path, "config")
    base = path.parent
    if "data" not in raw or "calendar" not in raw:
        raise ConfigError(f"{path}: config needs 'data' and 'calendar' paths")
    breaks = raw.get("breakpoints", {})
    historical = tuple(
        _parse_date(d, f"{path} breakpoints.historical") for d in breaks.get("historical", [])
    )
    future = tuple(
        FutureBreak(
            _parse_date(f.get("date"), f"{path} breakpoints.future"),
            float(f["slope"]),
        )
        for f in breaks.get("future", [])
    )
    horizon = raw.get("horizon")
    if horizon is not None:
        horizon = int(horizon)
        if horizon < 1:
            raise ConfigError(f"{path}: horizon must be >= 1")
    net_overrides = raw.get("net", {})
    if not isinstance(net_overrides, dict):
        raise ConfigError(f"{path}: 'net' must be an object of NetConfig overrides")
    cfg = RunConfig(
        data=base / raw["data"],
        calendar=base / raw["calendar"],
        historical_breaks=historical,
        future_breaks=future,
        split=_parse_date(raw["split"], str(path)) if "split" in raw else None,
        horizon=horizon,
        net_overrides=net_overrides,
        seed=int(raw.get("seed", 0)),
        out_dir=base / raw.get("out_dir", "out"),
    )
    for p, kind in ((cfg.data, "data"), (cfg.calendar, "calendar")):
        if not p.exists():
            raise ConfigError(f"{kind} file not found: {p}")
    return cfg


def _net_config(cfg: RunConfig) -> NetConfig:
    overrides = dict(cfg.net_overrides)
    for key in ("dilations", "dense_widths"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    overrides.setdefault("seed", cfg.seed)
    try:
        return NetConfig(**overrides)
    except TypeError as exc:
        raise ConfigError(f"bad net config: {exc}") from None


def _training_series(cfg: RunConfig) -> tuple[DailySeries, DailySeries | None]:
    series = read_series_csv(cfg.data)
    if cfg.split is None:
        return series, None
    train, test = split(series, cfg.split)
    return train, test


def _build_plan(cfg: RunConfig, train: DailySeries) -> BreakpointPlan:
    indices = tuple(
        (d - train.start_date).days for d in cfg.historical_breaks
    )
    plan = BreakpointPlan(historical=indices, future=cfg.future_breaks)
    plan.validate_for_span(train.start_date, train.end_date)
    return plan


def _write_residuals_csv(path: Path, eps) -> None:
    lines = ["date,residual"]
    lines += [
        f"{eps.date_at(i).isoformat()},{repr(float(eps.values[i]))}"
        for i in range(len(eps))
    ]
    path.write_text("\n".join(lines) + "\n")


def cmd_synth(args) -> int:
    params_path = Path(args.config)
    raw = _read_json(params_path, "params")
    calendar_raw = raw.get("calendar")
    if isinstance(calendar_raw, str):
        spec, _ = load_calendar(params_path.parent / calendar_raw)
    elif isinstance(calendar_raw, dict):
        spec, _ = parse_calendar(calendar_raw, where=f"{params_path}:calendar")
    else:
        raise ConfigError(f"{params_path}: 'calendar' must be a path or an object")
    residual_raw = raw.get("residual", {})
    try:
        params = SynthParams(
            calendar=spec,
            start=_parse_date(raw.get("start", "2018-01-01"), str(params_path)),
            years=int(raw.get("years", 4)),
            extra_days=int(raw.get("extra_days", 0)),
            base_level=float(raw.get("base_level", 50_000.0)),
            segment_starts=tuple(map(tuple, raw.get(
                "segment_starts", [[1, 1], [3, 1], [5, 1], [7, 1], [9, 1], [11, 1]]
            ))),
            segment_slopes=tuple(raw.get(
                "segment_slopes", [-350.0, 300.0, 550.0, -550.0, 320.0, -280.0]
            )),
            weekday_offsets=tuple(raw.get(
                "weekday_offsets", [0.0, 30.0, 50.0, 40.0, -20.0, -1600.0, -2100.0]
            )),
            holiday_offsets=dict(raw.get("holiday_offsets", {})),
            spring_dip_depth=float(raw.get("spring_dip_depth", 9_000.0)),
            spring_dip_half_width=int(raw.get("spring_dip_half_width", 21)),
            residual=ResidualSpec(
                kind=residual_raw.get("kind", "white"),
                sigma=float(residual_raw.get("sigma", 500.0)),
                phi=float(residual_raw.get("phi", 0.0)),
            ),
            seed=args.seed if args.seed is not None else int(raw.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{params_path}: bad synth params: {exc}") from None
    series, truth = generate(params)
    out_dir = Path(args.out if args.out else params_path.parent / "out")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_series_csv(out_dir / "data.csv", series)
    write_ground_truth_csv(out_dir / "ground_truth.csv", params, truth)
    print(f"wrote {out_dir / 'data.csv'} and {out_dir / 'ground_truth.csv'} "
          f"({len(series)} days)")
    return 0


def cmd_fit(args) -> int:
    cfg = load_run_config(Path(args.config))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    spec, exclusions = load_calendar(cfg.calendar)
    train, _ = _training_series(cfg)
    plan = _build_plan(cfg, train)
    mask = exclusions.clipped_to(train.start_date, train.end_date)
    model, report = fit_filter(train, spec, plan, mask)
    eps = residuals(model, train, spec, mask)
    out_dir = Path(args.out) if args.out else cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    save_model(out_dir / "model.json", model)
    _write_residuals_csv(out_dir / "residuals.csv", eps)
    (out_dir / "fit_report.json").write_text(
        json.dumps(report.to_json(), indent=2, sort_keys=True)
    )
    print(
        f"fit {report.n_retained} rows ({report.n_excluded} excluded), "
        f"training RMSE {report.training_rmse:.3f}"
    )
    return 0


def cmd_forecast(args) -> int:
    cfg = load_run_config(Path(args.config))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if cfg.horizon is None:
        raise ConfigError("forecast needs 'horizon' in the config")
    spec, exclusions = load_calendar(cfg.calendar)
    train, test = _training_series(cfg)
    plan = _build_plan(cfg, train)
    mask = exclusions.clipped_to(train.start_date, train.end_date)
    result = two_stage_forecast(
        train, spec, plan, _net_config(cfg), cfg.horizon, mask
    )
    out_dir = Path(args.out) if args.out else cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    save_model(out_dir / "model.json", result.model)
    save_net(out_dir / "net.json", result.net)
    write_training_log(out_dir / "training_log.csv", result.training_log)

    actual_by_date = None
    if test is not None:
        actual_by_date = {
            test.date_at(i): float(test.values[i]) for i in range(len(test))
        }
    write_forecast_csv(out_dir / "forecast.csv", result.forecast, actual_by_date)
    if actual_by_date and any(d in actual_by_date for d in result.forecast.dates):
        metrics = evaluate_forecast(result.forecast, actual_by_date, exclusions)
        write_metrics_json(out_dir / "metrics.json", metrics)
        print(
            f"forecast {cfg.horizon} days; RMSE {metrics['rmse']:.3f}, "
            f"MAPE {metrics['mape']:.3f}% over {metrics['n_days']} days"
        )
    else:
        print(f"forecast {cfg.horizon} days (no overlapping actuals)")
    return 0


def cmd_evaluate(args) -> int:
    forecast = read_forecast_csv(Path(args.forecast))
    actual = read_series_csv(Path(args.actual))
    missing = [
        d for d in forecast.dates
        if not actual.start_date <= d <= actual.end_date
    ]
    if missing:
        raise DataError(
            f"date alignment: {len(missing)} forecast dates missing from actuals, "
            f"first {missing[0].isoformat()} (actuals cover "
            f"{actual.start_date}..{actual.end_date})"
        )
    actual_by_date = {
        actual.date_at(i): float(actual.values[i]) for i in range(len(actual))
    }
    metrics = evaluate_forecast(forecast, actual_by_date)
    out = Path(args.out) if args.out else Path("metrics.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_metrics_json(out, metrics)
    print(
        f"RMSE {metrics['rmse']:.6g}, MAPE {metrics['mape']:.6g}% "
        f"over {metrics['n_days']} days"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loadcast",
        description="Two-stage daily consumption forecasting "
                    "(piecewise-linear filter + dilated causal CNN).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic benchmark series")
    p_synth.add_argument("--config", required=True, help="synth params JSON")
    p_synth.add_argument("--out", help="output directory")
    p_synth.add_argument("--seed", type=int, help="override the params seed")
    p_synth.set_defaults(func=cmd_synth)

    p_fit = sub.add_parser("fit", help="fit the piecewise-linear filter")
    p_fit.add_argument("--config", required=True, help="run config JSON")
    p_fit.add_argument("--out", help="output directory")
    p_fit.add_argument("--seed", type=int, help="override the config seed")
    p_fit.set_defaults(func=cmd_fit)

    p_fc = sub.add_parser("forecast", help="two-stage forecast past the training span")
    p_fc.add_argument("--config", required=True, help="run config JSON")
    p_fc.add_argument("--out", help="output directory")
    p_fc.add_argument("--seed", type=int, help="override the config seed")
    p_fc.set_defaults(func=cmd_forecast)

    p_ev = sub.add_parser("evaluate", help="score a forecast CSV against actuals")
    p_ev.add_argument("--forecast", required=True, help="forecast CSV")
    p_ev.add_argument("--actual", required=True, help="actuals CSV (date,consumption)")
    p_ev.add_argument("--out", help="metrics JSON path (default metrics.json)")
    p_ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except LoadcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
