import datetime as dt
import json

import numpy as np
import pytest

from loadcast.errors import ConfigError, MissingCalendarError
from loadcast.features import (
    CalendarSpec,
    FeatureLayout,
    calendar_to_json,
    encode_adjustment,
    encode_holiday,
    encode_month,
    encode_weekday,
    feature_value,
    in_spring_window,
    load_calendar,
    spring_distance,
)

D = dt.date


@pytest.fixture
def spec():
    return CalendarSpec(
        holidays=(
            ("national_day", D(2021, 10, 1), D(2021, 10, 7)),
            ("labour_day", D(2021, 5, 1), D(2021, 5, 5)),
        ),
        spring_festival_starts={2021: D(2021, 2, 11)},
        adjustment_days=(D(2021, 9, 26), D(2021, 10, 9)),
    )


class TestMonthEncoding:
    def test_january_is_baseline(self):
        assert np.array_equal(encode_month(D(2020, 1, 15)), np.zeros(11))

    def test_february_is_first_entry(self):
        vec = encode_month(D(2020, 2, 1))
        expected = np.zeros(11)
        expected[0] = 1.0
        assert np.array_equal(vec, expected)

    def test_december_is_last_entry(self):
        vec = encode_month(D(2020, 12, 31))
        expected = np.zeros(11)
        expected[10] = 1.0
        assert np.array_equal(vec, expected)

    def test_feb_29_is_ordinary_february(self):
        assert np.array_equal(encode_month(D(2020, 2, 29)), encode_month(D(2020, 2, 1)))


class TestWeekdayEncoding:
    def test_monday_is_baseline(self):
        assert np.array_equal(encode_weekday(D(2018, 1, 1)), np.zeros(6))

    def test_tuesday_is_first_entry(self):
        vec = encode_weekday(D(2018, 1, 2))
        expected = np.zeros(6)
        expected[0] = 1.0
        assert np.array_equal(vec, expected)

    def test_sunday_is_last_entry(self):
        # 2018-01-01 was a Monday, so +6 days lands on Sunday
        assert (D(2018, 1, 1) + dt.timedelta(days=6)) == D(2018, 1, 7)
        vec = encode_weekday(D(2018, 1, 7))
        expected = np.zeros(6)
        expected[5] = 1.0
        assert np.array_equal(vec, expected)


class TestHolidayEncoding:
    def test_plain_weekday_all_zero(self, spec):
        assert np.array_equal(encode_holiday(D(2021, 3, 17), spec), np.zeros(2))

    def test_containment(self, spec):
        vec = encode_holiday(D(2021, 10, 3), spec)
        names = spec.holiday_names()
        assert vec[names.index("national_day")] == 1.0
        assert vec.sum() == 1.0

    def test_spring_window_not_in_holiday_dummies(self, spec):
        # festival days are carried by the distance variable, not H'
        inside = D(2021, 2, 14)
        assert in_spring_window(inside, spec)
        assert np.array_equal(encode_holiday(inside, spec), np.zeros(2))

    def test_dummy_entries_binary(self, spec):
        d = D(2021, 1, 1)
        for _ in range(400):
            for vec in (encode_month(d), encode_weekday(d), encode_holiday(d, spec)):
                assert set(np.unique(vec)) <= {0.0, 1.0}
                assert vec.sum() <= 1.0
            d += dt.timedelta(days=1)


class TestAdjustmentDays:
    def test_listed_and_unlisted(self, spec):
        assert encode_adjustment(D(2021, 9, 26), spec) == 1
        assert encode_adjustment(D(2021, 9, 27), spec) == 0

    def test_adjustment_inside_holiday_rejected(self):
        with pytest.raises(ConfigError):
            CalendarSpec(
                holidays=(("national_day", D(2021, 10, 1), D(2021, 10, 7)),),
                spring_festival_starts={2021: D(2021, 2, 11)},
                adjustment_days=(D(2021, 10, 3),),
            )


class TestCalendarValidation:
    def test_overlapping_holidays_rejected(self):
        with pytest.raises(ConfigError):
            CalendarSpec(
                holidays=(
                    ("a", D(2021, 10, 1), D(2021, 10, 7)),
                    ("b", D(2021, 10, 7), D(2021, 10, 8)),
                ),
            )

    def test_spring_start_inside_generic_holiday_rejected(self):
        with pytest.raises(ConfigError):
            CalendarSpec(
                holidays=(("spring", D(2021, 2, 11), D(2021, 2, 17)),),
                spring_festival_starts={2021: D(2021, 2, 11)},
            )

    def test_negative_widths_rejected(self):
        with pytest.raises(ConfigError):
            CalendarSpec(spring_half_width=-1)
        with pytest.raises(ConfigError):
            CalendarSpec(spring_center_offset=-2)


class TestSpringDistance:
    def test_center_is_zero(self, spec):
        center = D(2021, 2, 14)  # start Feb 11 + 3 days
        assert spec.spring_center(2021) == center
        assert spring_distance(center, spec) == 0

    def test_inside_window(self, spec):
        assert spring_distance(D(2021, 2, 24), spec) == 10

    def test_outside_threshold_is_zero(self, spec):
        assert spring_distance(D(2021, 3, 8), spec) == 0  # 22 days past the center
        assert spring_distance(D(2021, 3, 7), spec) == 21

    def test_symmetry_about_center(self, spec):
        center = spec.spring_center(2021)
        for k in range(0, 40):
            left = spring_distance(center - dt.timedelta(days=k), spec)
            right = spring_distance(center + dt.timedelta(days=k), spec)
            assert left == right

    def test_unregistered_year_raises(self, spec):
        with pytest.raises(MissingCalendarError):
            spring_distance(D(2019, 2, 10), spec)

    def test_december_uses_next_years_festival(self):
        spec = CalendarSpec(
            spring_festival_starts={2021: D(2021, 2, 11), 2022: D(2022, 1, 5)}
        )
        # center 2022-01-08; Dec 30 2021 is 9 days before it
        assert spring_distance(D(2021, 12, 30), spec) == 9

    def test_pure_function_of_date(self, spec):
        d = D(2021, 2, 20)
        assert spring_distance(d, spec) == spring_distance(d, spec)
        assert np.array_equal(encode_month(d), encode_month(d))
        assert np.array_equal(encode_weekday(d), encode_weekday(d))


class TestFeatureLayout:
    def test_column_count_no_breaks_no_holidays(self):
        layout = FeatureLayout.build((), (), spring_window_indicator=False)
        # intercept + t + 11 months + 6 weekdays + adjustment + S^3 S^2 S
        assert len(layout) == 2 + 11 + 6 + 0 + 1 + 3 == 23

    def test_hinges_add_columns(self):
        layout = FeatureLayout.build((10, 20, 30, 40, 50, 60), ("a",), False)
        assert len(layout) == 23 + 6 + 1
        assert layout.hinge_indices() == (10, 20, 30, 40, 50, 60)

    def test_indicator_column_optional(self):
        base = FeatureLayout.build((), (), False)
        with_flag = FeatureLayout.build((), (), True)
        assert len(with_flag) == len(base) + 1
        assert with_flag.columns[-1] == ("spring_window",)

    def test_row_length_matches_layout(self, spec):
        layout = FeatureLayout.build((100,), spec.holiday_names(), True)
        d = D(2021, 2, 14)
        row = [feature_value(c, d, 44, spec) for c in layout.columns]
        assert len(row) == len(layout)

    def test_names_deterministic(self, spec):
        layout = FeatureLayout.build((7,), spec.holiday_names(), False)
        assert layout.names() == layout.names()
        assert layout.names()[0] == "intercept"
        assert "hinge[t=7]" in layout.names()

    def test_json_round_trip(self, spec):
        layout = FeatureLayout.build((3, 9), spec.holiday_names(), True)
        again = FeatureLayout.from_json(json.loads(json.dumps(layout.to_json())))
        assert again == layout


class TestCalendarFile:
    def test_load_round_trip(self, tmp_path, spec):
        from loadcast.series import ExclusionMask

        mask = ExclusionMask(((D(2020, 1, 1), D(2020, 3, 31)),))
        path = tmp_path / "calendar.json"
        path.write_text(json.dumps(calendar_to_json(spec, mask)))
        loaded, loaded_mask = load_calendar(path)
        assert loaded == spec
        assert loaded_mask == mask

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_calendar(tmp_path / "nope.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_calendar(path)
