"""Two-stage forecast composition and the evaluation metrics."""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MetricError
from .features import CalendarSpec
from .net import NetConfig, EpochLog, predict_residuals, train
from .piecewise import BreakpointPlan, FilterModel, fit_filter, predict, residuals
from .series import DailySeries, ExclusionMask


@dataclass(frozen=True)
class Forecast:
    """Per-date filter and residual components; total is their exact sum."""

    dates: tuple[dt.date, ...]
    filter_component: np.ndarray
    residual_component: np.ndarray
    total: np.ndarray
    metrics: dict | None = None

    def __post_init__(self):
        n = len(self.dates)
        if not (len(self.filter_component) == len(self.residual_component) == len(self.total) == n):
            raise ValueError("forecast arrays must all have the same length")
        if not np.array_equal(self.total, self.filter_component + self.residual_component):
            raise ValueError("total must equal filter_component + residual_component")


def rmse(actual, predicted) -> float:
    """Root mean squared error, in the data's units."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if actual.shape != predicted.shape or actual.ndim != 1 or len(actual) < 1:
        raise MetricError("rmse needs two equal-length nonempty series")
    return float(np.sqrt(np.mean((actual - predicted) ** 2)))


def mape(actual, predicted) -> float:
    """Mean absolute percentage error (in %); undefined for zero actuals."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if actual.shape != predicted.shape or actual.ndim != 1 or len(actual) < 1:
        raise MetricError("mape needs two equal-length nonempty series")
    if np.any(actual == 0.0):
        raise MetricError("mape is undefined when an actual value is zero")
    return float(100.0 * np.mean(np.abs(actual - predicted) / np.abs(actual)))


@dataclass(frozen=True)
class TwoStageResult:
    forecast: Forecast
    model: FilterModel
    net: object
    training_log: tuple[EpochLog, ...]


def two_stage_forecast(
    series: DailySeries,
    spec: CalendarSpec,
    plan: BreakpointPlan,
    net_config: NetConfig,
    horizon: int,
    mask: ExclusionMask | None = None,
) -> TwoStageResult:
    """Fit the filter, train the residual net, and forecast past the series end.

    The forecast total for each horizon date is the filter prediction plus
    the recursively predicted residual.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    model, _ = fit_filter(series, spec, plan, mask)
    eps = residuals(model, series, spec, mask)
    net, log = train(eps, net_config)
    dates = tuple(
        series.end_date + dt.timedelta(days=h) for h in range(1, horizon + 1)
    )
    x_pwl = predict(model, dates, spec)
    eps_cnn = predict_residuals(net, eps, horizon)
    forecast = Forecast(
        dates=dates,
        filter_component=x_pwl,
        residual_component=eps_cnn,
        total=x_pwl + eps_cnn,
    )
    return TwoStageResult(forecast, model, net, tuple(log))


def evaluate_forecast(
    forecast: Forecast,
    actual_by_date: dict[dt.date, float],
    mask: ExclusionMask | None = None,
) -> dict:
    """RMSE/MAPE over the forecast dates that have a (non-excluded) actual."""
    mask = mask or ExclusionMask()
    pairs = [
        (actual_by_date[d], t)
        for d, t in zip(forecast.dates, forecast.total)
        if d in actual_by_date and not mask.contains(d)
    ]
    if not pairs:
        raise MetricError("no overlapping dates between forecast and actuals")
    actual = np.array([a for a, _ in pairs])
    predicted = np.array([p for _, p in pairs])
    return {
        "n_days": len(pairs),
        "rmse": rmse(actual, predicted),
        "mape": mape(actual, predicted),
    }


def write_forecast_csv(
    path: str | Path,
    forecast: Forecast,
    actual_by_date: dict[dt.date, float] | None = None,
) -> None:
    """Standard ``date,filter,residual,total[,actual,error]`` export."""
    with_actuals = actual_by_date is not None
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["date", "filter", "residual", "total"]
        if with_actuals:
            header += ["actual", "error"]
        writer.writerow(header)
        for i, d in enumerate(forecast.dates):
            row = [
                d.isoformat(),
                repr(float(forecast.filter_component[i])),
                repr(float(forecast.residual_component[i])),
                repr(float(forecast.total[i])),
            ]
            if with_actuals:
                actual = actual_by_date.get(d)
                if actual is None:
                    row += ["", ""]
                else:
                    row += [repr(float(actual)), repr(float(forecast.total[i] - actual))]
            writer.writerow(row)


def read_forecast_csv(path: str | Path) -> Forecast:
    from .errors import DataError

    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:4] != ["date", "filter", "residual", "total"]:
                raise DataError(f"{path}: expected a forecast CSV header")
            dates, filt, resid, total = [], [], [], []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    dates.append(dt.date.fromisoformat(row[0]))
                    filt.append(float(row[1]))
                    resid.append(float(row[2]))
                    total.append(float(row[3]))
                except (ValueError, IndexError) as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    return Forecast(
        dates=tuple(dates),
        filter_component=np.array(filt),
        residual_component=np.array(resid),
        total=np.array(total),
    )


def write_metrics_json(path: str | Path, metrics: dict) -> None:
    Path(path).write_text(json.dumps(metrics, indent=2, sort_keys=True))
