"""Custom exceptions for the noiselab toolkit."""

from typing import Any, Dict, Optional


class NoiseLabException(Exception):
    """Base exception for noiselab."""

    def __init__(
        self,
        message: str,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        super().__init__(self.message)


class ConfigurationError(NoiseLabException):
    """Raised when there's a configuration error."""
    pass


class ParameterError(NoiseLabException):
    """Raised when an operation is called outside its preconditions."""
    pass


class DomainError(ParameterError):
    """Raised when a function is evaluated where it is undefined."""
    pass


class ShapeError(NoiseLabException):
    """Raised when a kernel or array does not have the required shape."""
    pass


class NumericError(NoiseLabException):
    """Raised when a numerical routine fails to meet its tolerance."""
    pass


class QuadratureError(NumericError):
    """Raised when a quadrature error estimate exceeds its target."""
    pass


class EigenSolveError(NumericError):
    """Raised when a symmetric eigensolve fails."""
    pass


class PrecisionError(NumericError):
    """Raised when a truncation tail exceeds its tolerance."""
    pass


class UsageError(NoiseLabException):
    """Raised for invalid command-line usage or unknown config keys."""
    pass


class ReportError(NoiseLabException):
    """Raised when report files cannot be written."""
    pass
