"""Exception types shared across the package."""


class ForecastError(Exception):
    """Base class for all package errors."""


class StepMismatchError(ForecastError, ValueError):
    pass


class InsufficientDataError(ForecastError, ValueError):
    pass


class DegenerateSeriesError(ForecastError, ValueError):
    pass


class SplitTooFineError(ForecastError, ValueError):
    pass


class UndefinedRelativeError(ForecastError, ValueError):
    pass


class MalformedCSVError(ForecastError, ValueError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class NotFittedError(ForecastError, RuntimeError):
    pass


class FitFailedError(ForecastError, RuntimeError):
    pass


class InfeasibleOrderError(ForecastError, ValueError):
    pass


class MethodUnavailableError(ForecastError, ValueError):
    """Raised when a method cannot run at a given sampling rate."""


class SearchFailedError(ForecastError, RuntimeError):
    pass


class TrainingDivergedError(ForecastError, FloatingPointError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
