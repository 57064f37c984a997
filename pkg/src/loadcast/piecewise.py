"""Piecewise linear regression filter.

Builds the design matrix (trend + hinge columns + calendar dummies + Spring
Festival cubic), fits it by pivoted-QR least squares, predicts with planned
future breakpoints, and emits the residual series for the second stage.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import (
    ConfigError,
    DataError,
    DegenerateDesignError,
    InsufficientDataError,
)
from .features import CalendarSpec, FeatureLayout, feature_value
from .series import DailySeries, ExclusionMask, ResidualSeries, apply_mask


def hinge(t: int, t_i: int) -> int:
    """(t - t_i) for t strictly past the breakpoint, else 0."""
    return t - t_i if t > t_i else 0


@dataclass(frozen=True)
class FutureBreak:
    """A planned breakpoint beyond the training span.

    ``slope`` is the absolute post-break trend slope in MWh/day, not a delta
    relative to the fitted trend.
    """

    date: dt.date
    slope: float


@dataclass(frozen=True)
class BreakpointPlan:
    historical: tuple[int, ...] = ()
    future: tuple[FutureBreak, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "historical", tuple(int(t) for t in self.historical))
        object.__setattr__(self, "future", tuple(self.future))
        hist = self.historical
        for a, b in zip(hist, hist[1:]):
            if a == b:
                raise DegenerateDesignError(
                    f"duplicate breakpoint at day {a}: two identical hinge columns"
                )
            if a > b:
                raise ConfigError("historical breakpoints must be strictly increasing")
        fut = self.future
        for a, b in zip(fut, fut[1:]):
            if a.date >= b.date:
                raise ConfigError("future breakpoints must be strictly increasing")

    def validate_for_span(self, train_start: dt.date, train_end: dt.date) -> None:
        span_len = (train_end - train_start).days + 1
        for t_i in self.historical:
            if not 0 < t_i < span_len - 1:
                raise ConfigError(
                    f"historical breakpoint day {t_i} not strictly inside the "
                    f"training span of {span_len} days"
                )
        for fb in self.future:
            if fb.date <= train_end:
                raise ConfigError(
                    f"future breakpoint {fb.date} not after training end {train_end}"
                )


@dataclass(frozen=True)
class FilterModel:
    """Fitted filter: feature layout, coefficients and the breakpoint plan."""

    layout: FeatureLayout
    coefficients: np.ndarray
    train_start: dt.date
    train_end: dt.date
    plan: BreakpointPlan

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=float)
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) != len(self.layout):
            raise ConfigError(
                f"{len(coeffs)} coefficients for {len(self.layout)} layout columns"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ConfigError("model coefficients must be finite")

    def trend_slope_at_train_end(self) -> float:
        """Fitted trend slope prevailing at the end of the training span."""
        slope = 0.0
        for col, beta in zip(self.layout.columns, self.coefficients):
            if col[0] in ("t", "hinge"):
                slope += beta
        return slope

    def segment_slopes(self) -> list[tuple[int, float]]:
        """(segment_start_day, trend_slope) for each historical segment."""
        t_coef = next(
            beta for col, beta in zip(self.layout.columns, self.coefficients)
            if col[0] == "t"
        )
        out = [(0, t_coef)]
        slope = t_coef
        for col, beta in zip(self.layout.columns, self.coefficients):
            if col[0] == "hinge":
                slope += beta
                out.append((col[1], slope))
        return out


def build_design_matrix(
    dates,
    t_values,
    plan: BreakpointPlan,
    spec: CalendarSpec,
) -> tuple[np.ndarray, FeatureLayout]:
    """One row per observation, columns per the deterministic feature layout."""
    layout = FeatureLayout.build(
        plan.historical, spec.holiday_names(), spec.spring_window_indicator
    )
    return design_rows(layout, dates, t_values, spec), layout


def design_rows(layout: FeatureLayout, dates, t_values, spec: CalendarSpec) -> np.ndarray:
    if len(dates) != len(t_values):
        raise ValueError("dates and t_values must be aligned")
    X = np.empty((len(dates), len(layout)))
    for i, (date, t) in enumerate(zip(dates, t_values)):
        for j, col in enumerate(layout.columns):
            X[i, j] = feature_value(col, date, int(t), spec)
    return X


def solve_least_squares(
    X: np.ndarray, y: np.ndarray, column_names: list[str] | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimum-SSR coefficients via QR with column pivoting.

    Returns (coefficients, R, pivot). Raises DegenerateDesignError naming the
    pivoted-out columns when X is rank deficient.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = X.shape
    if m < n:
        raise InsufficientDataError(f"{m} rows for {n} columns")
    if len(y) != m:
        raise ValueError("y must align with the rows of X")
    Q, R, pivot = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(m, n) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < n:
        if column_names is None:
            column_names = [f"col{j}" for j in range(n)]
        offending = sorted(column_names[pivot[k]] for k in range(rank, n))
        raise DegenerateDesignError(
            "design matrix is rank deficient; collinear column group: "
            + ", ".join(offending)
        )
    z = scipy.linalg.solve_triangular(R, Q.T @ y)
    coeffs = np.empty(n)
    coeffs[pivot] = z
    return coeffs, R, pivot


def _standard_errors(R, pivot, ssr: float, m: int, n: int) -> np.ndarray | None:
    if m <= n:
        return None
    sigma2 = ssr / (m - n)
    r_inv = scipy.linalg.solve_triangular(R, np.eye(n))
    diag_pivoted = np.sum(r_inv * r_inv, axis=1)
    diag = np.empty(n)
    diag[pivot] = diag_pivoted
    return np.sqrt(sigma2 * diag)


def _solve_skipping_empty(X: np.ndarray, y: np.ndarray, names: list[str]):
    """Least squares with structurally-empty (all-zero) columns pinned to 0.

    A dummy column can be legitimately empty (e.g. no adjustment days in the
    calendar), which is not a design error; genuine collinearity among the
    active columns still raises.
    """
    active = np.any(X != 0.0, axis=0)
    X_act = X[:, active]
    act_names = [nm for nm, keep in zip(names, active) if keep]
    coeffs_act, R, pivot = solve_least_squares(X_act, y, act_names)
    coeffs = np.zeros(X.shape[1])
    coeffs[active] = coeffs_act
    return coeffs, R, pivot, active


def fit(
    X: np.ndarray,
    y: np.ndarray,
    layout: FeatureLayout,
    plan: BreakpointPlan,
    train_start: dt.date,
    train_end: dt.date,
) -> FilterModel:
    """Least-squares fit of a prepared design matrix into a FilterModel."""
    coeffs, _, _, _ = _solve_skipping_empty(X, y, layout.names())
    return FilterModel(layout, coeffs, train_start, train_end, plan)


@dataclass(frozen=True)
class FitReport:
    column_names: tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray | None  # NaN entries mark empty (pinned) columns
    training_rmse: float
    n_retained: int
    n_excluded: int
    segment_slopes: tuple[tuple[int, float], ...]

    def to_json(self) -> dict:
        if self.std_errors is None:
            ses = np.full(len(self.coefficients), np.nan)
        else:
            ses = self.std_errors
        return {
            "coefficients": [
                {
                    "name": name,
                    "estimate": float(est),
                    "std_error": None if np.isnan(se) else float(se),
                }
                for name, est, se in zip(self.column_names, self.coefficients, ses)
            ],
            "training_rmse": float(self.training_rmse),
            "rows_retained": self.n_retained,
            "rows_excluded": self.n_excluded,
            "segment_slopes": [
                {"from_day": day, "slope": float(s)} for day, s in self.segment_slopes
            ],
        }


def fit_filter(
    series: DailySeries,
    spec: CalendarSpec,
    plan: BreakpointPlan,
    mask: ExclusionMask | None = None,
) -> tuple[FilterModel, FitReport]:
    """Fit the filter on a training series, dropping masked dates from the fit."""
    mask = mask or ExclusionMask()
    plan.validate_for_span(series.start_date, series.end_date)
    retained = apply_mask(series, mask)
    if not retained:
        raise InsufficientDataError("every observation is excluded by the mask")
    indices = [i for i, _ in retained]
    y = np.array([v for _, v in retained])
    dates = [series.date_at(i) for i in indices]
    X, layout = build_design_matrix(dates, indices, plan, spec)
    coeffs, R, pivot, active = _solve_skipping_empty(X, y, layout.names())
    resid = y - X @ coeffs
    ssr = float(resid @ resid)
    ses_active = _standard_errors(R, pivot, ssr, len(y), int(active.sum()))
    if ses_active is None:
        std_errors = None
    else:
        std_errors = np.full(len(layout), np.nan)
        std_errors[active] = ses_active
    model = FilterModel(layout, coeffs, series.start_date, series.end_date, plan)
    report = FitReport(
        column_names=tuple(layout.names()),
        coefficients=coeffs,
        std_errors=std_errors,
        training_rmse=float(np.sqrt(ssr / len(y))),
        n_retained=len(retained),
        n_excluded=len(series) - len(retained),
        segment_slopes=tuple(model.segment_slopes()),
    )
    return model, report


def _check_spec_compat(model: FilterModel, spec: CalendarSpec) -> None:
    wanted = {c[1] for c in model.layout.columns if c[0] == "holiday"}
    missing = wanted - set(spec.holiday_names())
    if missing:
        raise ConfigError(
            "calendar spec lacks holidays the model was fitted with: "
            + ", ".join(sorted(missing))
        )


def _future_adjustment(model: FilterModel, t_arr: np.ndarray) -> np.ndarray:
    """Hinge deltas turning planned absolute slopes into trajectory changes."""
    adj = np.zeros(len(t_arr))
    prev_slope = model.trend_slope_at_train_end()
    for fb in model.plan.future:
        t_b = (fb.date - model.train_start).days
        delta = fb.slope - prev_slope
        adj += delta * np.maximum(0.0, t_arr - t_b)
        prev_slope = fb.slope
    return adj


def predict(model: FilterModel, dates, spec: CalendarSpec) -> np.ndarray:
    """Filter prediction X_pwl for arbitrary dates.

    In-sample dates evaluate the fitted equation directly; dates beyond the
    training span additionally pick up the planned future-breakpoint hinges,
    so the post-break trend slope equals each planned absolute slope.
    """
    _check_spec_compat(model, spec)
    t_arr = np.array([(d - model.train_start).days for d in dates], dtype=float)
    X = design_rows(model.layout, dates, t_arr, spec)
    return X @ model.coefficients + _future_adjustment(model, t_arr)


def predict_trend(model: FilterModel, dates) -> np.ndarray:
    """Trend component only: intercept, t and hinge terms (no calendar dummies)."""
    t_arr = np.array([(d - model.train_start).days for d in dates], dtype=float)
    out = np.zeros(len(t_arr))
    for col, beta in zip(model.layout.columns, model.coefficients):
        if col[0] == "intercept":
            out += beta
        elif col[0] == "t":
            out += beta * t_arr
        elif col[0] == "hinge":
            out += beta * np.maximum(0.0, t_arr - col[1])
    return out + _future_adjustment(model, t_arr)


def residuals(
    model: FilterModel,
    series: DailySeries,
    spec: CalendarSpec,
    mask: ExclusionMask | None = None,
) -> ResidualSeries:
    """Observed minus filter prediction on every retained date."""
    mask = mask or ExclusionMask()
    retained = apply_mask(series, mask)
    indices = np.array([i for i, _ in retained], dtype=int)
    y = np.array([v for _, v in retained])
    dates = [series.date_at(int(i)) for i in indices]
    eps = y - predict(model, dates, spec)
    return ResidualSeries(series.start_date, indices, eps)


# --- model artifact -------------------------------------------------------

def model_to_json(model: FilterModel) -> dict:
    return {
        "format_version": 1,
        "kind": "piecewise_filter",
        "layout": model.layout.to_json(),
        "coefficients": [float(c) for c in model.coefficients],
        "train_start": model.train_start.isoformat(),
        "train_end": model.train_end.isoformat(),
        "plan": {
            "historical": list(model.plan.historical),
            "future": [
                {"date": fb.date.isoformat(), "slope": fb.slope}
                for fb in model.plan.future
            ],
        },
    }


def model_from_json(data: dict) -> FilterModel:
    try:
        if data.get("format_version") != 1 or data.get("kind") != "piecewise_filter":
            raise ConfigError("not a version-1 piecewise_filter artifact")
        plan = BreakpointPlan(
            historical=tuple(data["plan"]["historical"]),
            future=tuple(
                FutureBreak(dt.date.fromisoformat(f["date"]), float(f["slope"]))
                for f in data["plan"]["future"]
            ),
        )
        return FilterModel(
            layout=FeatureLayout.from_json(data["layout"]),
            coefficients=np.array(data["coefficients"], dtype=float),
            train_start=dt.date.fromisoformat(data["train_start"]),
            train_end=dt.date.fromisoformat(data["train_end"]),
            plan=plan,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed filter model artifact: {exc}") from None


def save_model(path: str | Path, model: FilterModel) -> None:
    Path(path).write_text(json.dumps(model_to_json(model), indent=2, sort_keys=True))


def load_model(path: str | Path) -> FilterModel:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return model_from_json(data)
