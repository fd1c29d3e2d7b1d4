"""Exception hierarchy shared by the library and the command-line front end.

Each class carries the process exit code the CLI maps it to.
"""

from __future__ import annotations


class GsqgError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class DomainError(GsqgError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    exit_code = 2


class ConfigurationError(GsqgError, ValueError):
    """Invalid physical parameters or configuration file contents."""

    exit_code = 2


class DegeneracyError(ConfigurationError):
    """The point-vortex equilibrium is degenerate (vanishing determinant)."""


class GeometryError(GsqgError):
    """Patches overlap, radii are non-positive, or a curve self-intersects."""

    exit_code = 3


class NumericalError(GsqgError, ArithmeticError):
    """A quadrature or linear solve produced non-finite values."""

    exit_code = 3


class SolverError(GsqgError):
    """Newton iteration failed to converge.

    ``history`` holds the residual max-norm after each iterate.
    """

    exit_code = 3

    def __init__(self, message: str, history: list[float] | None = None) -> None:
        super().__init__(message)
        self.history = list(history or [])


class VerificationError(GsqgError):
    """An independent check disagreed with the solver."""

    exit_code = 4


class MissingPrerequisiteError(GsqgError):
    """A command needs outputs that an earlier command has not produced."""

    exit_code = 5
