"""Exception types shared across the package."""

from __future__ import annotations


class AdsbUlError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(AdsbUlError, ValueError):
    """A value violates a documented precondition (non-finite, bad range, ...)."""


class InvalidNacpError(InvalidInputError):
    """NACp value outside the defined 0..11 range."""


class CorruptInputError(AdsbUlError):
    """Too large a fraction of an input stream failed to parse."""


class InsufficientDataError(AdsbUlError):
    """Not enough samples to perform the requested computation."""


class InvalidAbscissaError(InvalidInputError):
    """Sample times are not strictly increasing."""


class OutOfDomainError(AdsbUlError):
    """Evaluation requested outside a fitted spline's time domain."""


class EmptyTrackError(AdsbUlError):
    """No usable reports remain after exclusions."""


class SmoothingFailedError(AdsbUlError):
    """Iterative smoothing exhausted its schedule without meeting the
    acceleration bounds.  Carries the diagnostics of the last attempt."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
