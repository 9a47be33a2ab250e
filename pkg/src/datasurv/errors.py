"""Exception hierarchy shared by every module."""


class DataSurvError(Exception):
    """Base class for all errors raised by datasurv."""


class InvalidParameterError(DataSurvError, ValueError):
    """A parameter is out of range. ``field`` names the offending parameter."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class InvalidStateError(DataSurvError, ValueError):
    """A compartment state is non-finite or negative."""


class UndefinedThresholdError(DataSurvError, ValueError):
    """A reproduction number or closed form has a zero denominator."""


class DivergenceError(DataSurvError, RuntimeError):
    """Integration produced a non-finite state."""

    def __init__(self, t: float, message: str = "non-finite state"):
        super().__init__(f"{message} at t={t!r}")
        self.t = t


class ConfigError(DataSurvError, ValueError):
    """A configuration file could not be parsed or failed validation."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field
