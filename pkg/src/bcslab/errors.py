from __future__ import annotations

from typing import Any


class BcsLabError(Exception):
    """Base class for every error raised by bcslab."""

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context = context

    def to_record(self) -> dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, **self.context}


class DomainError(BcsLabError, ValueError):
    """Argument outside the domain of a function."""


class RangeError(DomainError):
    """Target value not attainable on the search bracket."""


class ConfigError(BcsLabError, ValueError):
    """Invalid run configuration."""


class PotentialError(BcsLabError, ValueError):
    """Invalid potential specification or table file."""


class PreconditionError(BcsLabError, ValueError):
    """Inputs violate an operation's precondition."""


class NumericalError(BcsLabError, RuntimeError):
    """A numerical procedure failed."""


class KernelError(NumericalError):
    pass


class EigenError(NumericalError):
    pass


class NonConvergenceError(NumericalError):
    pass


class BracketError(NumericalError):
    pass


class OutputError(BcsLabError, OSError):
    """An artifact could not be written."""
