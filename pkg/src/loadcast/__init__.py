"""Two-stage daily electricity consumption forecasting.

Stage one is a piecewise-linear regression filter with calendar and Spring
Festival features; stage two is a from-scratch dilated causal CNN trained on
the filter residuals. The forecast is the sum of both stages.
"""

from .errors import (
    ConfigError,
    DataError,
    DegenerateDesignError,
    InsufficientDataError,
    InvalidStateError,
    LoadcastError,
    MetricError,
    MissingCalendarError,
    NumericalError,
    TrainingDivergenceError,
)
from .features import (
    CalendarSpec,
    FeatureLayout,
    encode_adjustment,
    encode_holiday,
    encode_month,
    encode_weekday,
    load_calendar,
    spring_distance,
)
from .forecast import Forecast, TwoStageResult, mape, rmse, two_stage_forecast
from .net import (
    AdamState,
    NetConfig,
    ResidualNet,
    adam_init,
    adam_step,
    backward,
    causal_conv_forward,
    forward,
    init_net,
    load_net,
    make_windows,
    predict_residuals,
    save_net,
    train,
)
from .piecewise import (
    BreakpointPlan,
    FilterModel,
    FutureBreak,
    build_design_matrix,
    fit_filter,
    hinge,
    load_model,
    predict,
    predict_trend,
    residuals,
    save_model,
)
from .series import (
    DailySeries,
    ExclusionMask,
    ResidualSeries,
    apply_mask,
    day_index,
    read_series_csv,
    split,
    write_series_csv,
)
from .synth import (
    GroundTruth,
    ResidualSpec,
    SynthParams,
    generate,
    true_breakpoint_dates,
)

__version__ = "0.1.0"
