"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CapError(Exception):
    """Base class for every error raised by capqbd."""


class SpecError(CapError, ValueError):
    """A chain specification is malformed or violates a structural invariant."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}" if field else message)


class ValidationError(SpecError):
    """A spec failed ``validate_spec`` with one or more errors."""

    def __init__(self, report):
        self.report = report
        lines = "; ".join(str(issue) for issue in report.errors)
        super().__init__(lines or "invalid chain spec")


class DomainError(CapError, ValueError):
    """Arguments outside the domain of a closed-form expression."""


class UnsupportedCase(CapError):
    """Base-term multiplicity pattern (or structure) outside the solvable cases."""


class SingularMatrix(CapError, ArithmeticError):
    """A pivot vanished during LU factorisation."""


class SingularSystem(CapError, ArithmeticError):
    """The boundary linear system could not be solved reliably."""

    def __init__(self, message: str, condition: float | None = None):
        self.condition = condition
        super().__init__(message)


class ResidualTooLarge(CapError, ArithmeticError):
    """Post-solve checks on the boundary system failed."""


class StateCapExceeded(CapError, MemoryError):
    """A truncated generator would exceed the configured state cap."""


class NonConvergence(CapError, ArithmeticError):
    """An iterative scheme did not converge within its iteration budget."""
