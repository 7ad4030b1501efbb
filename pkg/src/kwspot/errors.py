"""Exception types shared across the toolkit."""


class KwspotError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(KwspotError):
    """Invalid or inconsistent configuration."""


class DataError(KwspotError):
    """Bad input data: missing files, malformed manifests, unusable audio."""


class FormatError(DataError):
    """Malformed binary container.

    Carries the byte offset at which parsing failed.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class AudioTooShortError(DataError):
    """Audio shorter than one analysis window."""


class ShapeError(KwspotError):
    """Tensor/sequence shape mismatch."""


class NumericError(KwspotError):
    """Non-finite values where finite math was required."""
