"""Exception hierarchy shared by all modules.

The CLI maps :class:`BudgetExceededError` and :class:`ConvergenceError` to
exit code 3; :class:`InvalidParametersError` is a ``ValueError`` so that
ordinary argument validation keeps working with plain ``except ValueError``.
"""


class RegspecError(Exception):
    """Base class for library errors."""


class InvalidParametersError(RegspecError, ValueError):
    """Arguments violate a documented precondition."""


class DepthTooSmallError(InvalidParametersError):
    """A truncated tree is too shallow for the requested computation."""


class BudgetExceededError(RegspecError):
    """An enumeration, restart or size cap was hit."""


class ConvergenceError(RegspecError):
    """An iterative or adaptive numerical routine did not converge."""


class MeasureDegenerateError(RegspecError):
    """A measure has too few support points for the requested degree."""
