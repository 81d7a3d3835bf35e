"""Exception hierarchy.  The CLI maps these onto exit codes."""
from __future__ import annotations


class G4VError(Exception):
    """Base class for all package errors."""


class ValidationError(G4VError, ValueError):
    """Input violates a documented invariant."""


class SchemaError(ValidationError):
    """A data file does not match its JSON schema."""


class NoSolutionError(ValidationError):
    """No coupling constants reproduce the requested APES."""

    def __init__(self, message: str, max_barrier: float | None = None):
        super().__init__(message)
        self.max_barrier = max_barrier


class CutoffOverflowError(ValidationError):
    """The requested vibronic basis exceeds the configured size limit."""


class NonConvergenceError(G4VError, RuntimeError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DegeneracyError(G4VError, RuntimeError):
    """The expected degenerate ground doublet could not be identified."""


class RangeError(G4VError, ValueError):
    """A pressure or measured value lies outside the supported range."""


class MissingDataError(G4VError, LookupError):
    """A requested observable has no data in the loaded tables."""


class SymmetryError(ValidationError):
    """A tensor or operator fails a required symmetry."""


class FrameError(ValidationError):
    """Inconsistent or invalid coordinate frames."""


class SingularRegimeError(G4VError, ArithmeticError):
    """A perturbative expression hits a vanishing denominator."""
