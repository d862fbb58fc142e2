"""Exception hierarchy shared by every imblab module."""


class ImblabError(Exception):
    """Base class for all library errors."""


class FormatError(ImblabError):
    """Input file does not follow the expected layout."""


class DataError(ImblabError):
    """Input values violate a dataset invariant (e.g. NaN or inf)."""


class SpecError(ImblabError):
    """An imbalance recipe or run configuration is invalid."""


class PreconditionError(ImblabError):
    """An operation was called on data it is not defined for."""


class StratificationError(PreconditionError):
    """A class has too few instances for the requested number of folds."""


class DegenerateClassError(PreconditionError):
    """A class has a single instance, so intra-class distance is undefined."""

    def __init__(self, label, message=None):
        self.label = label
        super().__init__(message or f"class {label!r} has fewer than 2 instances")


class ShapeError(ImblabError, ValueError):
    """Array shapes do not match what a model or loss expects."""


class ArgumentError(ImblabError, ValueError):
    """A scalar argument is outside its allowed range."""


class NumericsError(ImblabError, FloatingPointError):
    """A non-finite value appeared where finite values are required."""


class LabelError(ImblabError, ValueError):
    """A class label is outside ``0..n_classes-1``."""


class GroupError(ImblabError, ValueError):
    """A positive/negative group needed by a loss is empty."""


class SamplerError(ImblabError):
    """A batch plan cannot be built from the given pools."""


class SmoteError(ImblabError):
    """SMOTE cannot interpolate inside a class."""


class MetricError(ImblabError, ValueError):
    """A metric is undefined for the given input."""


class ValidationCoverageError(ImblabError):
    """The validation split lacks a class seen during training."""
