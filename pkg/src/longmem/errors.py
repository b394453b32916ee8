"""Exception types shared across the package."""


class LongmemError(Exception):
    """Base class for every error this package raises deliberately."""


class ParameterError(LongmemError, ValueError):
    """An argument violates an operation's contract."""


class ModelError(LongmemError, ValueError):
    """Process specification is invalid (root moduli, d range, variance)."""


class PrecisionError(LongmemError):
    """A certified truncation or error bound could not be met."""


class NotPositiveDefiniteError(LongmemError):
    """Autocovariance input is not positive definite."""


class SingularGramError(LongmemError):
    """Least-squares Gram matrix is singular or numerically rank deficient."""

    def __init__(self, message: str, order: int | None = None):
        super().__init__(message)
        self.order = order


class DegenerateDataError(LongmemError):
    """Input data is degenerate for the requested computation."""


class ConvergenceError(LongmemError):
    """An iteration failed to converge; carries the last estimate."""

    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message)
        self.estimate = estimate


class RankError(LongmemError):
    """Design matrix does not have full column rank where it must."""


class ConditioningError(LongmemError):
    """A linear system is too ill conditioned to solve reliably."""


class SizeCapError(LongmemError):
    """Requested dense object exceeds the configured size cap."""


class NotApplicableError(LongmemError):
    """Requested diagnostic is undefined for the given inputs."""
