"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class LoadcastError(Exception):
    """Base class for all loadcast errors."""


class ConfigError(LoadcastError):
    """Invalid configuration or specification (calendar, plan, net config)."""


class MissingCalendarError(ConfigError):
    """A date needs a Spring Festival year that is not registered."""


class DataError(LoadcastError):
    """Bad, misaligned or out-of-range input data."""


class InsufficientDataError(DataError):
    """Not enough observations for the requested operation."""


class MetricError(DataError):
    """Metric undefined for the given inputs (e.g. zero actual in MAPE)."""


class NumericalError(LoadcastError):
    """Numerical failure during fitting or training."""


class DegenerateDesignError(NumericalError):
    """Design matrix is rank deficient (exactly collinear columns)."""


class TrainingDivergenceError(NumericalError):
    """Training produced non-finite losses or gradients."""


class InvalidStateError(LoadcastError):
    """Operation called with stale or missing cached state."""
