"""Exception hierarchy shared by every qaffde module."""

from __future__ import annotations


class QaffdeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(QaffdeError, ValueError):
    """An argument violates an operation's precondition."""


class NumericDegenerateError(QaffdeError, ArithmeticError):
    """A computation hit a degenerate numeric case (zero norm, failed eigensolve)."""


class TrainingDivergedError(QaffdeError, ArithmeticError):
    """The training loss became non-finite."""

    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"training diverged at step {step} (loss={loss!r})")


class UndefinedCorrelationError(QaffdeError, ValueError):
    """A rank correlation was requested for a constant input."""


class ConfigurationError(QaffdeError, ValueError):
    """A generator or pipeline configuration cannot be honoured."""
