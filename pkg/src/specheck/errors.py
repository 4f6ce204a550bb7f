"""Exception types shared across the toolkit."""


class SpecheckError(Exception):
    """Base class for toolkit errors."""


class InvalidInput(SpecheckError, ValueError):
    """Input violates a documented precondition (shape, range, finiteness)."""


class NumericalFailure(SpecheckError, ArithmeticError):
    """An iterative routine failed to converge."""


class DegenerateSpectrum(SpecheckError, ValueError):
    """A simple-eigenvalue formula was requested inside a degenerate cluster."""
