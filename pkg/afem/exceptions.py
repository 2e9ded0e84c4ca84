"""Custom exceptions for the adaptive finite element toolkit."""

from typing import Any


class AFEMError(Exception):
    """Base exception for all AFEM errors."""

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        """Initialize AFEM error.

        Args:
            message: Error message
            details: Additional error details

        """
        super().__init__(message)
        self.details = details or {}


class ConfigurationError(AFEMError):
    """Raised when configuration is invalid or missing."""


class ValidationError(AFEMError):
    """Raised when input validation fails."""

    def __init__(self, field: str, value: Any, message: str) -> None:
        super().__init__(message, {"field": field, "value": value})
        self.field = field
        self.value = value


class MeshError(AFEMError):
    """Raised when a mesh cannot be built or refined."""


class PointLocationError(MeshError):
    """Raised when a point lies outside the meshed domain."""

    def __init__(self, point: tuple[float, float]) -> None:
        super().__init__(f"Point ({point[0]:.6g}, {point[1]:.6g}) lies outside the domain", {"point": point})
        self.point = point


class MeshFormatError(MeshError):
    """Raised when a mesh or function file cannot be parsed."""


class ProblemError(AFEMError):
    """Raised for invalid problem data."""


class OverflowGuardError(ProblemError):
    """Raised when a Butler-Volmer argument exceeds the exponent guard."""

    def __init__(self, max_abs: float, limit: float) -> None:
        super().__init__(
            f"Butler-Volmer argument |t|={max_abs:.6g} exceeds the overflow guard {limit:.6g}",
            {"max_abs": max_abs, "limit": limit},
        )
        self.max_abs = max_abs
        self.limit = limit


class QuadratureError(AFEMError):
    """Raised when an unsupported quadrature rule is requested."""


class SolverError(AFEMError):
    """Base class for nonlinear and linear solver failures."""


class LinearSolverError(SolverError):
    """Raised when the conjugate gradient iteration breaks down or hits its cap."""

    def __init__(self, message: str, iterations: int) -> None:
        super().__init__(message, {"iterations": iterations})
        self.iterations = iterations


class NewtonConvergenceError(SolverError):
    """Raised when Newton's method does not reach the increment tolerance."""

    def __init__(self, message: str, report: Any) -> None:
        super().__init__(message, {"report": report})
        self.report = report


class AdaptiveLoopError(AFEMError):
    """Raised when the adaptive loop aborts; carries the record collected so far."""

    def __init__(self, message: str, partial_run: Any) -> None:
        super().__init__(message, {"iterations": len(getattr(partial_run, "records", []))})
        self.partial_run = partial_run


class ExportError(AFEMError):
    """Raised when export operations fail."""

    def __init__(self, format: str, message: str, details: dict[str, Any] | None = None) -> None:
        super().__init__(message, details)
        self.format = format


class CacheError(AFEMError):
    """Raised when cache operations fail."""
