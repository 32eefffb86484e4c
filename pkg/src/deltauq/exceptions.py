"""Exception types raised across the package."""


class DeltaUQError(Exception):
    """Base class for all package errors."""


class DimensionError(DeltaUQError, ValueError):
    """An array does not have the dimension the operation expects."""


class NotFittedError(DeltaUQError, RuntimeError):
    """A model was used for prediction before training."""


class TrainingError(DeltaUQError, RuntimeError):
    """Training diverged (non-finite loss)."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class DomainError(DeltaUQError, ValueError):
    """A point lies outside a benchmark function's domain box."""


class CsvFormatError(DeltaUQError, ValueError):
    """A CSV file could not be parsed into a dataset."""


class ConfigError(DeltaUQError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
