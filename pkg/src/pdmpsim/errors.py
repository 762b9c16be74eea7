"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class PdmpError(Exception):
    """Base class for all package errors."""


class DomainError(PdmpError, ValueError):
    """An argument lies outside the domain of an operation."""


class ModelError(PdmpError, ValueError):
    """A model violates its declared contract (e.g. jump probabilities)."""


class UnsupportedModelError(ModelError):
    """The requested operation needs model features that are missing."""


class NumericalError(PdmpError, ArithmeticError):
    """A numerical procedure failed; carries diagnostic context."""

    def __init__(self, message: str, **context):
        self.message = message
        self.context = dict(context)
        super().__init__(self._format())

    def _format(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v!r}" for k, v in self.context.items())
        return f"{self.message} ({details})"

    def annotate(self, **more) -> "NumericalError":
        """Add context in place and return ``self`` for re-raising."""
        self.context.update(more)
        self.args = (self._format(),)
        return self


class StepError(NumericalError):
    """An implicit Runge-Kutta step failed to converge."""


class PairingError(PdmpError, ValueError):
    """Two trajectories cannot be compared jump by jump."""


class InsufficientDataError(PdmpError, ValueError):
    """Too few usable points to estimate a convergence order."""

    def __init__(self, message: str, reasons: dict[str, int] | None = None):
        self.reasons = dict(reasons or {})
        if self.reasons:
            message = f"{message}: " + ", ".join(f"{k}={v}" for k, v in self.reasons.items())
        super().__init__(message)
