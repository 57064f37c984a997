import datetime as dt

from loadcast.features import CalendarSpec

D = dt.date

# first official Spring Festival holiday day, per year
SPRING_STARTS = {
    2018: D(2018, 2, 15),
    2019: D(2019, 2, 4),
    2020: D(2020, 1, 24),
    2021: D(2021, 2, 11),
    2022: D(2022, 1, 31),
    2023: D(2023, 1, 21),
}


def make_calendar(first_year=2018, last_year=2022, indicator=False,
                  with_adjustment_days=True):
    """A plausible multi-year holiday calendar for tests and demos."""
    holidays = []
    for year in range(first_year, last_year + 1):
        holidays += [
            ("new_year", D(year, 1, 1), D(year, 1, 3)),
            ("qingming", D(year, 4, 4), D(year, 4, 6)),
            ("labour_day", D(year, 5, 1), D(year, 5, 5)),
            ("national_day", D(year, 10, 1), D(year, 10, 7)),
        ]
    adjustment = ()
    if with_adjustment_days:
        adjustment = tuple(
            D(year, 9, 28) for year in range(first_year, last_year + 1)
        )
    return CalendarSpec(
        holidays=tuple(holidays),
        spring_festival_starts={
            y: d for y, d in SPRING_STARTS.items() if first_year <= y <= last_year
        },
        adjustment_days=adjustment,
        spring_window_indicator=indicator,
    )


HOLIDAY_OFFSETS = {
    "new_year": -2200.0,
    "qingming": -1400.0,
    "labour_day": -2800.0,
    "national_day": -3600.0,
}
