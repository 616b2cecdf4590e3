"""Exception types raised across the package.

The CLI maps each family onto a fixed exit code, so new error types should
subclass one of these rather than raising bare built-ins.
"""


class QTradeoffError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(QTradeoffError, ValueError):
    pass


class ParseError(QTradeoffError, ValueError):
    pass


class DomainError(QTradeoffError, ValueError):
    """Parameter point outside a model's declared domain."""


class SingularInformationError(QTradeoffError, ArithmeticError):
    """Information matrix not positive definite (parameters not locally identifiable)."""


class ConsistencyError(QTradeoffError, ArithmeticError):
    """A numerical identity that must hold for pure-state models was violated."""


class ValidationError(QTradeoffError, ValueError):
    """A user-supplied object failed a structural check.

    ``rows`` lists the offending row indices when the check is row-wise.
    """

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(int(r) for r in rows)


class ConvergenceError(QTradeoffError, RuntimeError):
    """Optimizer failed to reach its certificate; carries the best value seen."""

    def __init__(self, message, best_residual=float("nan"), best=None):
        super().__init__(message)
        self.best_residual = float(best_residual)
        self.best = best


class ResolutionError(QTradeoffError, ValueError):
    """Discretization grid too coarse for the requested scene."""

    def __init__(self, message, suggested_points=None):
        super().__init__(message)
        self.suggested_points = suggested_points
