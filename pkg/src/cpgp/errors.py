"""Exception hierarchy shared across the package.

Numerical failures carry enough context (theta, delta, p) to locate the
offending evaluation inside a period scan.
"""


class CpgpError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CpgpError, ValueError):
    """An input violates a documented precondition (non-finite, wrong sign, ...)."""


class NumericalSymmetryError(CpgpError):
    """A vector presented as a symmetric circulant row is not symmetric."""


class SingularMatrixError(CpgpError):
    """A structured matrix has a non-positive eigenvalue and cannot be solved."""


class NotPositiveDefiniteError(CpgpError):
    """A factorization hit a pivot at or below the positive-definiteness floor."""

    def __init__(self, message, index=None, context=None):
        super().__init__(message)
        self.index = index
        self.context = context or {}


class RankDeficientBasisError(CpgpError):
    """The regression basis produced a singular normal-equation system."""


class NumericalFailureError(CpgpError):
    """A likelihood or prediction came out non-finite."""

    def __init__(self, message, theta=None, delta=None, p=None):
        super().__init__(message)
        self.theta = theta
        self.delta = delta
        self.p = p


class InitializationFailureError(CpgpError):
    """Every candidate of the starting grid failed to evaluate."""


class FitFailureError(CpgpError):
    """The period scan produced no valid candidate."""


class ConfigError(CpgpError):
    """Bad or inconsistent run configuration (CLI exit code 2)."""


class SignalIOError(CpgpError):
    """Unreadable or malformed signal file (CLI exit code 4)."""

    def __init__(self, message, path=None, line=None):
        super().__init__(message)
        self.path = path
        self.line = line
