"""Exception hierarchy shared across the library.

CLI exit-code mapping: UsageError -> 1, BackendError -> 2, DataError -> 3.
"""


class VisiiError(Exception):
    """Base class for all library errors."""


class UsageError(VisiiError):
    """Caller passed inconsistent or out-of-range arguments."""


class DataError(VisiiError):
    """Input artifacts (images, .visii files, manifests) are missing or malformed."""


class BackendError(VisiiError):
    """The frozen model backend failed to load or to run."""


class BackendUnavailableError(BackendError):
    """Backend config missing, unreadable, or naming an unknown model."""


class GeometryError(UsageError):
    """Array shape does not match the backend's declared geometry."""


class TokenOverflowError(UsageError):
    """Text does not fit in the 75 content-token budget."""


class DegenerateDirectionError(DataError):
    """Edit direction is a zero vector (identical or cancelling pairs)."""


class SerializationError(DataError):
    """A .visii file is truncated, corrupt, or of an unknown version."""


class CaptionerError(DataError):
    """The pluggable captioner was unavailable or failed."""


class InversionDivergedError(VisiiError):
    """Optimization produced a non-finite loss; carries partial history."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history or []
