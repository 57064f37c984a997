"""Daily series containers, date arithmetic, splitting and exclusion masks."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

ONE_DAY = dt.timedelta(days=1)


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DailySeries:
    """Consecutive daily consumption observations starting at ``start_date``.

    Day ``i`` of the series is ``start_date + i days``; gaps are not allowed
    and must be expressed through an :class:`ExclusionMask` instead.
    """

    start_date: dt.date
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.values.ndim != 1 or len(self.values) < 1:
            raise DataError("series needs at least one daily value")
        if not np.all(np.isfinite(self.values)):
            raise DataError("series values must all be finite")
        if np.any(self.values < 0):
            raise DataError("consumption values must be nonnegative")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self.values) - 1)

    def date_at(self, index: int) -> dt.date:
        if not 0 <= index < len(self.values):
            raise DataError(f"day index {index} outside series of length {len(self)}")
        return self.start_date + dt.timedelta(days=index)

    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self))]


@dataclass(frozen=True)
class ExclusionMask:
    """Inclusive date ranges to drop from fitting (COVID-style windows)."""

    ranges: tuple[tuple[dt.date, dt.date], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ranges", tuple(tuple(r) for r in self.ranges))
        prev_last = None
        for first, last in self.ranges:
            if last < first:
                raise DataError(f"mask range {first}..{last} ends before it starts")
            if prev_last is not None and first <= prev_last:
                raise DataError("mask ranges must be sorted and non-overlapping")
            prev_last = last

    def contains(self, date: dt.date) -> bool:
        return any(first <= date <= last for first, last in self.ranges)

    def validate_for(self, series: DailySeries) -> None:
        for first, last in self.ranges:
            if last < series.start_date or first > series.end_date:
                raise DataError(
                    f"mask range {first}..{last} does not intersect the series span"
                )

    def clipped_to(self, start: dt.date, end: dt.date) -> "ExclusionMask":
        """Keep only the ranges intersecting [start, end]."""
        return ExclusionMask(
            tuple(r for r in self.ranges if r[0] <= end and r[1] >= start)
        )


@dataclass(frozen=True)
class ResidualSeries:
    """Filter residuals; like a DailySeries but signed and possibly gapped.

    ``indices`` are day offsets from ``start_date`` of the series the
    residuals were derived from, so excluded dates simply have no entry.
    """

    start_date: dt.date
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", _frozen_array(self.indices, dtype=int))
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.indices.shape != self.values.shape or self.indices.ndim != 1:
            raise DataError("residual indices and values must be aligned 1-D arrays")
        if len(self.indices) and np.any(np.diff(self.indices) <= 0):
            raise DataError("residual indices must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise DataError("residual values must all be finite")

    def __len__(self) -> int:
        return len(self.values)

    def date_at(self, position: int) -> dt.date:
        return self.start_date + dt.timedelta(days=int(self.indices[position]))


def day_index(series: DailySeries, date: dt.date) -> int:
    """Days elapsed since the series start (start date maps to 0)."""
    offset = (date - series.start_date).days
    if not 0 <= offset < len(series):
        raise DataError(
            f"{date} outside series span {series.start_date}..{series.end_date}"
        )
    return offset


def split(series: DailySeries, boundary: dt.date) -> tuple[DailySeries, DailySeries]:
    """Split into (before boundary, from boundary on); boundary strictly inside."""
    if not series.start_date < boundary < series.end_date:
        raise DataError(
            f"split boundary {boundary} must lie strictly inside "
            f"{series.start_date}..{series.end_date}"
        )
    cut = (boundary - series.start_date).days
    left = DailySeries(series.start_date, series.values[:cut])
    right = DailySeries(boundary, series.values[cut:])
    return left, right


def apply_mask(
    series: DailySeries, mask: ExclusionMask
) -> list[tuple[int, float]]:
    """Retained (day_index, value) pairs; indices keep their calendar meaning."""
    mask.validate_for(series)
    out = []
    for i in range(len(series)):
        if not mask.contains(series.date_at(i)):
            out.append((i, float(series.values[i])))
    return out


def read_series_csv(path: str | Path) -> DailySeries:
    """Load the standard ``date,consumption`` CSV (consecutive daily rows)."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            if [h.strip() for h in header] != ["date", "consumption"]:
                raise DataError(f"{path}: expected header 'date,consumption'")
            dates, values = [], []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 2:
                    raise DataError(f"{path}:{lineno}: expected two columns")
                try:
                    dates.append(dt.date.fromisoformat(row[0].strip()))
                    values.append(float(row[1]))
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not dates:
        raise DataError(f"{path}: no data rows")
    for i in range(1, len(dates)):
        if dates[i] - dates[i - 1] != ONE_DAY:
            raise DataError(
                f"{path}: rows must be consecutive daily dates; gap or disorder "
                f"between {dates[i - 1]} and {dates[i]} (use exclusion ranges "
                f"for gaps, not missing rows)"
            )
    return DailySeries(dates[0], np.array(values))


def write_series_csv(path: str | Path, series: DailySeries) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "consumption"])
        for i, v in enumerate(series.values):
            writer.writerow([series.date_at(i).isoformat(), repr(float(v))])
