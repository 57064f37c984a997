"""Seeded generator of realistic multi-year daily consumption series.

The emitted series is an exact sum of its ground-truth components: a
continuous piecewise-linear annual trend (six segments per year), weekday
and holiday offsets, a quadratic Spring Festival dip, and a white-noise or
AR(1) residual process. The components are returned alongside the series so
tests can use the generator itself as the oracle.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .features import CalendarSpec, raw_spring_distance
from .series import DailySeries


@dataclass(frozen=True)
class ResidualSpec:
    """Residual process: white noise, or AR(1) with innovation std sigma."""

    kind: str = "white"
    sigma: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("white", "ar1"):
            raise ConfigError("residual kind must be 'white' or 'ar1'")
        if not self.sigma > 0:
            raise ConfigError("residual sigma must be positive")
        if self.kind == "ar1" and not abs(self.phi) < 1:
            raise ConfigError("AR(1) phi must satisfy |phi| < 1")

    @property
    def variance(self) -> float:
        """Stationary variance of the process."""
        if self.kind == "white":
            return self.sigma ** 2
        return self.sigma ** 2 / (1.0 - self.phi ** 2)


@dataclass(frozen=True)
class SynthParams:
    calendar: CalendarSpec
    start: dt.date = dt.date(2018, 1, 1)
    years: int = 4
    extra_days: int = 0
    base_level: float = 50_000.0
    segment_starts: tuple[tuple[int, int], ...] = (
        (1, 1), (3, 1), (5, 1), (7, 1), (9, 1), (11, 1),
    )
    segment_slopes: tuple[float, ...] = (-350.0, 300.0, 550.0, -550.0, 320.0, -280.0)
    weekday_offsets: tuple[float, ...] = (0.0, 30.0, 50.0, 40.0, -20.0, -1600.0, -2100.0)
    holiday_offsets: dict[str, float] = field(default_factory=dict)
    spring_dip_depth: float = 9_000.0
    spring_dip_half_width: int = 21
    residual: ResidualSpec = ResidualSpec()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "segment_starts", tuple(map(tuple, self.segment_starts)))
        object.__setattr__(self, "segment_slopes", tuple(self.segment_slopes))
        object.__setattr__(self, "weekday_offsets", tuple(self.weekday_offsets))
        if self.years < 1 or self.extra_days < 0:
            raise ConfigError("need years >= 1 and extra_days >= 0")
        if (self.start.month, self.start.day) != (1, 1):
            raise ConfigError("series must start on January 1")
        if len(self.segment_starts) != len(self.segment_slopes):
            raise ConfigError("one slope per segment is required")
        if not self.segment_starts or self.segment_starts[0] != (1, 1):
            raise ConfigError("the first segment must start on (1, 1)")
        try:
            probe = [dt.date(2001, m, d) for m, d in self.segment_starts]
        except ValueError as exc:
            raise ConfigError(f"bad segment boundary: {exc}") from None
        if any(b >= a for b, a in zip(probe, probe[1:])):
            raise ConfigError("segment boundaries must be strictly increasing")
        if len(self.weekday_offsets) != 7:
            raise ConfigError("weekday_offsets needs 7 values (Mon..Sun)")
        unknown = set(self.holiday_offsets) - set(self.calendar.holiday_names())
        if unknown:
            raise ConfigError(
                "holiday offsets for holidays missing from the calendar: "
                + ", ".join(sorted(unknown))
            )
        if self.spring_dip_half_width < 0:
            raise ConfigError("spring_dip_half_width must be >= 0")

    @property
    def n_days(self) -> int:
        end_of_years = dt.date(self.start.year + self.years, 1, 1)
        return (end_of_years - self.start).days + self.extra_days


@dataclass(frozen=True)
class GroundTruth:
    trend: np.ndarray
    weekday: np.ndarray
    holiday: np.ndarray
    spring: np.ndarray
    residual: np.ndarray

    def components(self) -> dict[str, np.ndarray]:
        return {
            "trend": self.trend,
            "weekday": self.weekday,
            "holiday": self.holiday,
            "spring": self.spring,
            "residual": self.residual,
        }


def true_breakpoint_dates(params: SynthParams) -> list[dt.date]:
    """Every segment boundary inside the span, excluding the series start."""
    last = params.start + dt.timedelta(days=params.n_days - 1)
    out = []
    for year in range(params.start.year, last.year + 1):
        for month, day in params.segment_starts:
            b = dt.date(year, month, day)
            if params.start < b <= last:
                out.append(b)
    return out


def _segment_slope_by_day(params: SynthParams, n_days: int) -> np.ndarray:
    """slope[u] = trend increment from day u-1 to day u (u >= 1).

    A boundary at day b leaves day b on the old slope, matching the strict
    hinge indicator (t - t_i) I(t > t_i).
    """
    breaks = [
        (b - params.start).days for b in true_breakpoint_dates(params)
    ]
    slopes = np.empty(n_days)
    seg = 0
    n_segments = len(params.segment_slopes)
    for u in range(1, n_days):
        while seg < len(breaks) and breaks[seg] < u:
            seg += 1
        slopes[u] = params.segment_slopes[seg % n_segments]
    slopes[0] = 0.0
    return slopes


def _spring_dip(date: dt.date, params: SynthParams) -> float:
    """Quadratic-in-distance dip: deepest at the festival center, zero at the edge."""
    width = params.spring_dip_half_width
    if width == 0 or params.spring_dip_depth == 0.0:
        return 0.0
    d = raw_spring_distance(date, params.calendar)
    if d > width:
        return 0.0
    return -params.spring_dip_depth * (1.0 - (d / width) ** 2)


def generate(params: SynthParams) -> tuple[DailySeries, GroundTruth]:
    """Deterministic series for a seed, plus its exact component breakdown."""
    n = params.n_days
    dates = [params.start + dt.timedelta(days=i) for i in range(n)]

    trend = params.base_level + np.cumsum(_segment_slope_by_day(params, n))

    weekday = np.array([params.weekday_offsets[d.weekday()] for d in dates])

    holiday = np.zeros(n)
    for name, first, last in params.calendar.holidays:
        offset = params.holiday_offsets.get(name, 0.0)
        if offset == 0.0:
            continue
        for i, d in enumerate(dates):
            if first <= d <= last:
                holiday[i] += offset

    spring = np.array([_spring_dip(d, params) for d in dates])

    rng = np.random.default_rng(params.seed)
    residual_spec = params.residual
    if residual_spec.kind == "white":
        residual = rng.normal(0.0, residual_spec.sigma, size=n)
    else:
        residual = np.empty(n)
        residual[0] = rng.normal(0.0, np.sqrt(residual_spec.variance))
        innovations = rng.normal(0.0, residual_spec.sigma, size=n - 1)
        for i in range(1, n):
            residual[i] = residual_spec.phi * residual[i - 1] + innovations[i - 1]

    values = trend + weekday + holiday + spring + residual
    series = DailySeries(params.start, values)
    return series, GroundTruth(trend, weekday, holiday, spring, residual)


def write_ground_truth_csv(path: str | Path, params: SynthParams, truth: GroundTruth) -> None:
    comps = truth.components()
    names = list(comps)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + names)
        for i in range(params.n_days):
            date = params.start + dt.timedelta(days=i)
            writer.writerow(
                [date.isoformat()] + [repr(float(comps[c][i])) for c in names]
            )
