"""Exception types raised by the package."""


class PointSourceError(Exception):
    """Base class for all errors raised by pointsource."""


class ConfigError(PointSourceError, ValueError):
    """Invalid or unknown configuration entry."""


class NumericalError(PointSourceError, ArithmeticError):
    """Base class for numerical failures (CLI exit code 3)."""


class SingularityError(NumericalError):
    """A fundamental solution was evaluated at (or too close to) its pole."""


class IllConditionedError(NumericalError):
    """A moment/Hankel system is too ill-conditioned to solve reliably."""


class DegenerateError(NumericalError):
    """Coincident nodes make the Vandermonde system singular."""


class DivergenceError(NumericalError):
    """Training loss blew up."""
