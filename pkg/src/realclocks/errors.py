"""Exception hierarchy shared by all modules."""


class RealClocksError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(RealClocksError, ValueError):
    """Invalid input parameter (bad step size, negative time, mismatch)."""


class RangeError(RealClocksError, ValueError):
    """Query outside a tabulated domain; no extrapolation is attempted."""


class IntegrityError(RealClocksError):
    """A data invariant is violated (e.g. strongly negative eigenvalue)."""


class NumericalError(RealClocksError, ArithmeticError):
    """An iterative method failed to converge."""
