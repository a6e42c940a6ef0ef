"""Exception hierarchy shared across the package.

The CLI maps each family onto a process exit code: configuration problems
exit with 2, data problems with 3 and numerical failures with 4.
"""


class DistgenError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DistgenError, ValueError):
    """Invalid or malformed experiment configuration."""


class DataError(DistgenError, ValueError):
    """Missing, corrupt or unusable input data."""


class IdxFormatError(DataError):
    """Base class for IDX container parsing failures."""


class BadMagicError(IdxFormatError):
    """The IDX magic number does not match the expected container type."""


class TruncatedFileError(IdxFormatError):
    """The IDX file ends before the declared payload is complete."""


class CountMismatchError(IdxFormatError):
    """Image and label files declare a different number of items."""


class NumericalError(DistgenError, ArithmeticError):
    """A numerical procedure failed (divergence, non-convergence, infeasibility)."""


class DivergenceError(NumericalError):
    """A training loop produced a non-finite loss or gradient."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap.

    Attributes
    ----------
    result : object
        The last iterate, so callers can inspect how far the solver got.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InfeasibleError(NumericalError):
    """The requested distortion level is below the achievable minimum."""
