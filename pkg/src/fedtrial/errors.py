"""Exception types shared across the package."""


class FedTrialError(Exception):
    """Base class for all package errors."""


class ConfigError(FedTrialError, ValueError):
    """Invalid configuration or architecture settings."""


class ShapeError(FedTrialError, ValueError):
    """Input dimensions do not match the model."""


class EncodingError(FedTrialError, ValueError):
    """A token index falls outside the model vocabulary."""


class NumericError(FedTrialError, ArithmeticError):
    """Non-finite values reached the optimizer."""


class AggregationError(FedTrialError, ValueError):
    """Client updates cannot be averaged together."""


class DataError(FedTrialError, ValueError):
    """A dataset is empty or otherwise unusable."""


class MetricError(FedTrialError, ValueError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""
