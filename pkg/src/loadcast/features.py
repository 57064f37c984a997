"""Calendar feature encoders: month/weekday/holiday/adjustment dummies and
the Spring Festival distance variable.

All dummy groups drop one baseline category (January, Monday, "no holiday")
so a design matrix with an intercept stays full rank.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, MissingCalendarError
from .series import ExclusionMask

MONTH_LABELS = (
    "jan", "feb", "mar", "apr", "may", "jun",
    "jul", "aug", "sep", "oct", "nov", "dec",
)
WEEKDAY_LABELS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")


@dataclass(frozen=True)
class CalendarSpec:
    """Holiday calendar for one region.

    holidays: (name, first_date, last_date) inclusive ranges, one entry per
        holiday per year. The Spring Festival must NOT be listed here; it is
        registered separately through ``spring_festival_starts``.
    spring_festival_starts: year -> first official holiday date.
    adjustment_days: weekend dates turned into working days.
    spring_half_width: distance threshold of the festival window (days).
    spring_center_offset: days from the festival start to its center
        (3 means the 4th holiday day).
    spring_window_indicator: add a 0/1 in-window column to feature layouts.
    """

    holidays: tuple[tuple[str, dt.date, dt.date], ...] = ()
    spring_festival_starts: dict[int, dt.date] = field(default_factory=dict)
    adjustment_days: tuple[dt.date, ...] = ()
    spring_half_width: int = 21
    spring_center_offset: int = 3
    spring_window_indicator: bool = False

    def __post_init__(self):
        object.__setattr__(self, "holidays", tuple(tuple(h) for h in self.holidays))
        object.__setattr__(self, "adjustment_days", tuple(self.adjustment_days))
        if self.spring_half_width < 0:
            raise ConfigError("spring_half_width must be >= 0")
        if self.spring_center_offset < 0:
            raise ConfigError("spring_center_offset must be >= 0")
        ranges = []
        for name, first, last in self.holidays:
            if last < first:
                raise ConfigError(f"holiday {name!r}: range {first}..{last} inverted")
            ranges.append((name, first, last))
        for i, (name_a, first_a, last_a) in enumerate(ranges):
            for name_b, first_b, last_b in ranges[i + 1:]:
                if first_a <= last_b and first_b <= last_a:
                    raise ConfigError(
                        f"holiday ranges overlap: {name_a!r} {first_a}..{last_a} "
                        f"and {name_b!r} {first_b}..{last_b}"
                    )
        for year, start in self.spring_festival_starts.items():
            for name, first, last in ranges:
                if first <= start <= last:
                    raise ConfigError(
                        f"Spring Festival start {start} ({year}) falls inside the "
                        f"generic holiday {name!r}; list the festival only via "
                        "spring_festival_starts"
                    )
        seen = set()
        for day in self.adjustment_days:
            if day in seen:
                raise ConfigError(f"adjustment day {day} listed twice")
            seen.add(day)
            for name, first, last in ranges:
                if first <= day <= last:
                    raise ConfigError(
                        f"adjustment day {day} lies inside holiday {name!r} "
                        f"({first}..{last}); a date cannot be both"
                    )

    def holiday_names(self) -> tuple[str, ...]:
        """Deterministic (sorted) order of the non-Spring holiday dummies."""
        return tuple(sorted({name for name, _, _ in self.holidays}))

    def spring_center(self, year: int) -> dt.date:
        try:
            start = self.spring_festival_starts[year]
        except KeyError:
            raise MissingCalendarError(
                f"no Spring Festival start registered for {year}"
            ) from None
        return start + dt.timedelta(days=self.spring_center_offset)


def encode_month(date: dt.date) -> np.ndarray:
    """One-hot over Feb..Dec (11 entries); January is the baseline."""
    vec = np.zeros(11)
    if date.month > 1:
        vec[date.month - 2] = 1.0
    return vec


def encode_weekday(date: dt.date) -> np.ndarray:
    """One-hot over Tue..Sun (6 entries); Monday is the baseline."""
    vec = np.zeros(6)
    wd = date.weekday()
    if wd > 0:
        vec[wd - 1] = 1.0
    return vec


def encode_holiday(date: dt.date, spec: CalendarSpec) -> np.ndarray:
    """One entry per named non-Spring holiday, 1 where date is inside its range."""
    names = spec.holiday_names()
    vec = np.zeros(len(names))
    for name, first, last in spec.holidays:
        if first <= date <= last:
            vec[names.index(name)] = 1.0
    return vec


def encode_adjustment(date: dt.date, spec: CalendarSpec) -> int:
    return 1 if date in spec.adjustment_days else 0


def raw_spring_distance(date: dt.date, spec: CalendarSpec) -> int:
    """Days to the nearest Spring Festival center, without any threshold.

    The date's own year must have a registered festival start; festivals of
    the adjacent years are also considered so that late-December dates can
    fall inside the window of an early-January festival.
    """
    if date.year not in spec.spring_festival_starts:
        raise MissingCalendarError(
            f"no Spring Festival start registered for {date.year}"
        )
    best = None
    for year in (date.year - 1, date.year, date.year + 1):
        if year not in spec.spring_festival_starts:
            continue
        d = abs((date - spec.spring_center(year)).days)
        best = d if best is None else min(best, d)
    return best


def spring_distance(date: dt.date, spec: CalendarSpec) -> int:
    """Distance to the festival center when inside the window, else 0."""
    d = raw_spring_distance(date, spec)
    return d if d <= spec.spring_half_width else 0


def in_spring_window(date: dt.date, spec: CalendarSpec) -> bool:
    """True when the date lies inside the festival window (center included)."""
    return raw_spring_distance(date, spec) <= spec.spring_half_width


# --- feature layout -------------------------------------------------------

# Column descriptors: ("intercept",) ("t",) ("hinge", day_index)
# ("month", 2..12) ("weekday", 1..6) ("holiday", name) ("adjustment",)
# ("spring", 3|2|1) ("spring_window",)


@dataclass(frozen=True)
class FeatureLayout:
    """Ordered description of every design-matrix column."""

    columns: tuple[tuple, ...]

    @classmethod
    def build(
        cls,
        hinge_indices: tuple[int, ...],
        holiday_names: tuple[str, ...],
        spring_window_indicator: bool,
    ) -> "FeatureLayout":
        cols: list[tuple] = [("intercept",), ("t",)]
        cols += [("hinge", int(t_i)) for t_i in hinge_indices]
        cols += [("month", m) for m in range(2, 13)]
        cols += [("weekday", w) for w in range(1, 7)]
        cols += [("holiday", name) for name in holiday_names]
        cols.append(("adjustment",))
        cols += [("spring", 3), ("spring", 2), ("spring", 1)]
        if spring_window_indicator:
            cols.append(("spring_window",))
        return cls(tuple(cols))

    def __len__(self) -> int:
        return len(self.columns)

    def names(self) -> list[str]:
        out = []
        for col in self.columns:
            kind = col[0]
            if kind == "intercept":
                out.append("intercept")
            elif kind == "t":
                out.append("t")
            elif kind == "hinge":
                out.append(f"hinge[t={col[1]}]")
            elif kind == "month":
                out.append(f"month_{MONTH_LABELS[col[1] - 1]}")
            elif kind == "weekday":
                out.append(f"weekday_{WEEKDAY_LABELS[col[1]]}")
            elif kind == "holiday":
                out.append(f"holiday_{col[1]}")
            elif kind == "adjustment":
                out.append("adjustment_day")
            elif kind == "spring":
                out.append(f"spring_dist^{col[1]}")
            elif kind == "spring_window":
                out.append("spring_window")
            else:
                raise ConfigError(f"unknown layout column {col!r}")
        return out

    def hinge_indices(self) -> tuple[int, ...]:
        return tuple(c[1] for c in self.columns if c[0] == "hinge")

    def to_json(self) -> list[list]:
        return [list(c) for c in self.columns]

    @classmethod
    def from_json(cls, data) -> "FeatureLayout":
        return cls(tuple(tuple(c) for c in data))


def feature_value(column: tuple, date: dt.date, t: int, spec: CalendarSpec) -> float:
    """Value of a single layout column for one observation."""
    kind = column[0]
    if kind == "intercept":
        return 1.0
    if kind == "t":
        return float(t)
    if kind == "hinge":
        return float(max(0, t - column[1]))
    if kind == "month":
        return 1.0 if date.month == column[1] else 0.0
    if kind == "weekday":
        return 1.0 if date.weekday() == column[1] else 0.0
    if kind == "holiday":
        name = column[1]
        for hname, first, last in spec.holidays:
            if hname == name and first <= date <= last:
                return 1.0
        return 0.0
    if kind == "adjustment":
        return float(encode_adjustment(date, spec))
    if kind == "spring":
        return float(spring_distance(date, spec)) ** column[1]
    if kind == "spring_window":
        return 1.0 if in_spring_window(date, spec) else 0.0
    raise ConfigError(f"unknown layout column {column!r}")


# --- JSON calendar file ---------------------------------------------------

def load_calendar(path: str | Path) -> tuple[CalendarSpec, ExclusionMask]:
    """Read a calendar JSON file; returns the spec plus its exclusion mask."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read calendar file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_calendar(raw, where=str(path))


def parse_calendar(raw: dict, where: str = "calendar") -> tuple[CalendarSpec, ExclusionMask]:
    def _date(s):
        try:
            return dt.date.fromisoformat(s)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: bad date {s!r}") from None

    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: top level must be an object")
    try:
        holidays = tuple(
            (h["name"], _date(h["first"]), _date(h["last"]))
            for h in raw.get("holidays", [])
        )
        starts = {
            int(year): _date(day)
            for year, day in raw.get("spring_festival_starts", {}).items()
        }
        adjustment = tuple(_date(d) for d in raw.get("adjustment_days", []))
        exclusions = tuple(
            (_date(a), _date(b)) for a, b in raw.get("exclusions", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: malformed calendar entry: {exc}") from None
    spec = CalendarSpec(
        holidays=holidays,
        spring_festival_starts=starts,
        adjustment_days=adjustment,
        spring_half_width=int(raw.get("spring_half_width", 21)),
        spring_center_offset=int(raw.get("spring_center_offset", 3)),
        spring_window_indicator=bool(raw.get("spring_window_indicator", False)),
    )
    return spec, ExclusionMask(exclusions)


def calendar_to_json(spec: CalendarSpec, mask: ExclusionMask | None = None) -> dict:
    return {
        "holidays": [
            {"name": n, "first": a.isoformat(), "last": b.isoformat()}
            for n, a, b in spec.holidays
        ],
        "spring_festival_starts": {
            str(y): d.isoformat() for y, d in sorted(spec.spring_festival_starts.items())
        },
        "adjustment_days": [d.isoformat() for d in spec.adjustment_days],
        "spring_half_width": spec.spring_half_width,
        "spring_center_offset": spec.spring_center_offset,
        "spring_window_indicator": spec.spring_window_indicator,
        "exclusions": [
            [a.isoformat(), b.isoformat()] for a, b in (mask.ranges if mask else ())
        ],
    }
