"""Custom exceptions for entityflow.

Every exception carries the process exit code the CLI reports for it.
"""


class EntityFlowError(Exception):
    """Base exception for all entityflow errors."""

    exit_code = 1


class UsageError(EntityFlowError):
    """Raised when an API is called out of order or with invalid arguments."""

    exit_code = 1


class ConfigurationError(EntityFlowError):
    """Raised when a configuration value is invalid or inconsistent with the data."""

    exit_code = 1


class DimensionError(EntityFlowError):
    """Raised when tensor shapes do not agree."""

    exit_code = 1


class DataError(EntityFlowError):
    """Raised when input data cannot be used."""

    exit_code = 2


class ParseError(DataError):
    """Raised when a CSV or checkpoint file is malformed."""

    pass


class UndefinedMetricError(DataError):
    """Raised when a metric is undefined for the given labels."""

    pass


class NumericError(EntityFlowError):
    """Raised when a computation produces NaN or Inf."""

    exit_code = 3


class DivergenceError(NumericError):
    """Raised when the training loss becomes non-finite.

    The last model state with a finite loss is kept in ``last_good`` so
    callers can still persist it, together with its training-split scores
    when those could be computed.
    """

    def __init__(self, message: str, last_good=None, epoch: int = 0, train_scores=None):
        super().__init__(message)
        self.last_good = last_good
        self.epoch = epoch
        self.train_scores = train_scores
