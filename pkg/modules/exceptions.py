# Error hierarchy shared by every module
from typing import Optional


class TrendForecastError(Exception):
    """Base class for all errors raised by the forecaster."""


class ArgumentError(TrendForecastError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(TrendForecastError, ValueError):
    """Input data is valid in shape but carries no usable information."""


class CapabilityError(TrendForecastError):
    """The requested computation is outside what the algorithm supports."""


class NumericalError(TrendForecastError, ArithmeticError):
    """A linear system or reduction could not be solved reliably."""


class TrainingDivergedError(NumericalError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"Training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


class FormatError(TrendForecastError):
    """A file does not follow its declared binary or text layout."""


class DataError(TrendForecastError):
    """A file is well formed but its contents are inconsistent."""


class ConfigError(TrendForecastError):
    """A run configuration is missing fields or holds invalid values."""


class PipelineStageError(TrendForecastError):
    def __init__(self, stage: str, cause: Optional[BaseException] = None):
        message = f"Stage '{stage}' failed"
        if cause is not None:
            message += f": {type(cause).__name__}: {cause}"
        super().__init__(message)
        self.stage = stage
        self.cause = cause
