"""Exception hierarchy shared by every module.

The CLI maps :class:`UsageError` to exit status 1 and every other
:class:`BLError` to exit status 2.
"""

from __future__ import annotations


class BLError(Exception):
    """Base class for all package errors."""


class UsageError(BLError, ValueError):
    """Invalid arguments: bad ids, missing inputs or targets, bad parameters."""


class NumericalFailure(BLError, ArithmeticError):
    """An iterative kernel failed to converge."""


class SingularMatrixError(BLError, ArithmeticError):
    """A pivot fell below the singularity threshold."""


class NoSolutionError(SingularMatrixError):
    """``I - G`` is singular, so the weight derivatives have no unique solution."""


class DegenerateStateError(BLError, ValueError):
    """A network state that the weight-derivative system cannot be assembled from (zero rate)."""


class DivergenceError(BLError, ArithmeticError):
    """An iteration blew up or failed to settle.

    ``residual`` carries the last measured residual and ``step`` the step
    index at which the failure was detected, when known.
    """

    def __init__(self, message: str, residual: float | None = None, step: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.step = step
