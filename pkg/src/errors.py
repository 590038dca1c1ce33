"""
Exceptions raised by the simulator.

Validation errors mean the caller passed something unusable (the CLI exits with code 2);
numerical errors mean a computation could not be trusted (the CLI exits with code 1).
"""


class SimulatorError(Exception):
    """Base class of every error raised by the package."""
    validation = False


class ValidationError(SimulatorError):
    validation = True


class NumericalError(SimulatorError):
    validation = False


class InvalidParams(ValidationError):
    pass


class TooFewRows(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class DataFormatError(ValidationError):
    pass


class DimensionMismatch(NumericalError):
    pass


class NotSPD(NumericalError):
    """A Cholesky pivot fell below the positive-definiteness threshold."""


class MissingNeighborValue(NumericalError):
    pass


class CutBudgetExceeded(NumericalError):
    """The outer approximation hit max_cuts before its gap closed."""


class NoCuts(NumericalError):
    pass
