"""Exception taxonomy shared across the package.

Everything derives from :class:`CritlabError` so callers can catch broadly.
The CLI maps these onto exit codes: validation problems exit with 2, solver
failures with 3, and I/O trouble with 4.
"""

from __future__ import annotations


class CritlabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(CritlabError):
    """A spec, config, or input field failed validation."""


class DimensionMismatchError(ValidationError):
    """Field/grid or weight/grid shapes do not line up."""


class InvalidFieldError(ValidationError):
    """Field values are non-finite or otherwise unusable."""


class OutOfDomainError(ValidationError):
    """A point lies outside the computational domain."""


class GeometryError(ValidationError):
    """Geometric preconditions are violated (cutoff too wide, center on the
    boundary, and so on)."""


class PreconditionError(CritlabError):
    """A mathematical precondition of an operation does not hold."""


class ModeError(PreconditionError):
    """A minimization mode was requested that the data does not support."""


class NonpositiveRemainderError(CritlabError):
    """Expansion fitting was asked to take logs of non-positive remainders."""


class WrongRegimeError(CritlabError):
    """A scalar inequality was invoked outside its exponent regime."""


class IndeterminateMultiplierError(CritlabError):
    """The Lagrange multiplier estimate has a vanishing denominator."""


class SolverFailureError(CritlabError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class StagnationError(SolverFailureError):
    """Eigenvalue iteration stagnated; carries the last Rayleigh quotient."""

    def __init__(self, message: str, rayleigh: float | None = None):
        super().__init__(message)
        self.rayleigh = rayleigh


class ResolutionWarning(UserWarning):
    """The grid under-resolves a bubble's concentration scale."""
