"""Exception hierarchy shared by every module.

``ParameterError`` and ``ConfigError`` signal caller mistakes (CLI exit 1);
everything deriving from ``NumericalError`` is a numerical failure (exit 2).
"""


class SlrcError(Exception):
    """Base class for all package errors."""


class ParameterError(SlrcError, ValueError):
    """An argument is outside its admissible range."""


class ConfigError(SlrcError):
    """A configuration file or override could not be parsed or validated."""


class ShapeError(SlrcError, ValueError):
    """Matrix or feature layouts do not line up."""


class NumericalError(SlrcError, ArithmeticError):
    """Base class for numerical failures."""


class DivergenceError(NumericalError):
    """A simulation or closed-loop run produced a non-finite value."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SingularMatrixError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class DegenerateMatrixError(NumericalError):
    pass


class StabilityError(NumericalError):
    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class UndefinedMetricError(NumericalError):
    pass


class AliasingWarning(UserWarning):
    """Downsampling moved the dominant frequency above the new Nyquist limit."""
