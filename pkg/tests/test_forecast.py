import datetime as dt
from dataclasses import replace

import numpy as np
import pytest

from conftest import HOLIDAY_OFFSETS, make_calendar
from loadcast.errors import MetricError
from loadcast.forecast import (
    Forecast,
    evaluate_forecast,
    mape,
    read_forecast_csv,
    rmse,
    two_stage_forecast,
    write_forecast_csv,
)
from loadcast.net import NetConfig, predict_residuals
from loadcast.piecewise import BreakpointPlan, FutureBreak, predict
from loadcast.series import ExclusionMask
from loadcast.synth import ResidualSpec, SynthParams, generate, true_breakpoint_dates

D = dt.date


class TestRmse:
    def test_identical_series(self):
        assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_hand_case(self):
        assert rmse([100.0, 200.0], [110.0, 190.0]) == pytest.approx(10.0, abs=1e-12)

    def test_single_point(self):
        assert rmse([5.0], [8.5]) == pytest.approx(3.5)

    def test_joint_permutation_invariance(self):
        rng = np.random.default_rng(1)
        a, p = rng.normal(size=30), rng.normal(size=30)
        perm = rng.permutation(30)
        assert rmse(a, p) == pytest.approx(rmse(a[perm], p[perm]), rel=1e-12)

    def test_positive_unless_identical(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=10)
        p = a.copy()
        p[3] += 1e-9
        assert rmse(a, p) > 0.0

    def test_length_mismatch(self):
        with pytest.raises(MetricError):
            rmse([1.0], [1.0, 2.0])


class TestMape:
    def test_identical_series(self):
        assert mape([4.0, 5.0], [4.0, 5.0]) == 0.0

    def test_hand_case(self):
        assert mape([100.0, 200.0], [110.0, 190.0]) == pytest.approx(7.5, abs=1e-12)

    def test_zero_actual_rejected(self):
        with pytest.raises(MetricError):
            mape([100.0, 0.0], [90.0, 5.0])

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(50, 150, size=40)
        p = a + rng.normal(0, 5, size=40)
        assert mape(a, p) == pytest.approx(mape(100.0 * a, 100.0 * p), rel=1e-12)


class TestForecastContainer:
    def test_sum_definition(self):
        f = Forecast(
            dates=(D(2022, 1, 1),),
            filter_component=np.array([100.0]),
            residual_component=np.array([5.0]),
            total=np.array([105.0]),
        )
        assert f.total[0] == 105.0

    def test_additivity_enforced(self):
        with pytest.raises(ValueError):
            Forecast(
                dates=(D(2022, 1, 1),),
                filter_component=np.array([100.0]),
                residual_component=np.array([5.0]),
                total=np.array([104.0]),
            )


def tiny_net_config(**over):
    base = dict(
        window=32, conv_layers=3, kernel_size=2, dilations=(1, 2, 4),
        channels=4, dense_widths=(8, 1), dropout_rate=0.2, seed=2,
        epochs=3, batch_size=16,
    )
    base.update(over)
    return NetConfig(**base)


@pytest.fixture(scope="module")
def small_two_stage():
    spec = make_calendar(2018, 2020)
    params = SynthParams(
        calendar=spec,
        start=D(2018, 1, 1),
        years=2,
        extra_days=30,
        holiday_offsets=HOLIDAY_OFFSETS,
        residual=ResidualSpec(kind="ar1", phi=0.7, sigma=300.0),
        seed=11,
    )
    series, _ = generate(params)
    train_series = replace_series = series  # full span as training
    breaks = [d for d in true_breakpoint_dates(params) if d <= series.end_date]
    plan = BreakpointPlan(
        historical=tuple((d - series.start_date).days for d in breaks),
    )
    result = two_stage_forecast(series, spec, plan, tiny_net_config(), horizon=20)
    return spec, series, plan, result


class TestTwoStage:
    def test_additivity(self, small_two_stage):
        spec, series, plan, result = small_two_stage
        f = result.forecast
        assert np.array_equal(f.total, f.filter_component + f.residual_component)
        assert len(f.dates) == 20
        assert f.dates[0] == series.end_date + dt.timedelta(days=1)

    def test_filter_component_matches_model(self, small_two_stage):
        spec, series, plan, result = small_two_stage
        f = result.forecast
        assert np.array_equal(
            f.filter_component, predict(result.model, list(f.dates), spec)
        )

    def test_zero_net_reduces_to_filter_only(self, small_two_stage):
        spec, series, plan, result = small_two_stage
        zero_net = replace(
            result.net, params=tuple(np.zeros_like(p) for p in result.net.params)
        )
        eps = predict_residuals(zero_net, result_history(result), 20)
        assert np.array_equal(eps, np.zeros(20))

    def test_metrics_only_over_non_excluded_dates(self, small_two_stage):
        spec, series, plan, result = small_two_stage
        f = result.forecast
        actual = {d: float(t) + 1.0 for d, t in zip(f.dates, f.total)}
        full = evaluate_forecast(f, actual)
        assert full["n_days"] == 20
        mask = ExclusionMask(((f.dates[0], f.dates[4]),))
        partial = evaluate_forecast(f, actual, mask)
        assert partial["n_days"] == 15

    def test_no_overlap_rejected(self, small_two_stage):
        spec, series, plan, result = small_two_stage
        with pytest.raises(MetricError):
            evaluate_forecast(result.forecast, {D(1999, 1, 1): 1.0})


def result_history(result):
    """Rebuild the residual history the net was trained on."""
    from loadcast.piecewise import residuals

    # the stored model knows its span; tests keep series/spec alongside
    return result._history  # noqa: attribute set below


@pytest.fixture(autouse=True)
def _attach_history(small_two_stage, monkeypatch):
    spec, series, plan, result = small_two_stage
    from loadcast.piecewise import residuals

    object.__setattr__(result, "_history", residuals(result.model, series, spec))
    yield


class TestForecastCsv:
    def test_round_trip(self, tmp_path, small_two_stage):
        spec, series, plan, result = small_two_stage
        path = tmp_path / "forecast.csv"
        write_forecast_csv(path, result.forecast)
        loaded = read_forecast_csv(path)
        assert loaded.dates == result.forecast.dates
        assert np.array_equal(loaded.total, result.forecast.total)

    def test_actual_and_error_columns(self, tmp_path, small_two_stage):
        spec, series, plan, result = small_two_stage
        f = result.forecast
        actual = {d: 100.0 for d in f.dates[:3]}
        path = tmp_path / "forecast.csv"
        write_forecast_csv(path, f, actual)
        lines = path.read_text().splitlines()
        assert lines[0] == "date,filter,residual,total,actual,error"
        assert lines[1].split(",")[4] == "100.0"
        # dates without actuals leave the columns empty
        assert lines[4].endswith(",,")
