"""Exception hierarchy for the toolkit.

Every error raised by disctok derives from DisctokError so callers can
catch toolkit failures separately from programming errors.
"""


class DisctokError(Exception):
    """Base class for all toolkit errors."""


class FeatureFormatError(DisctokError):
    """File does not start with the expected magic bytes."""


class FeatureVersionError(DisctokError):
    """Magic matched but the container version is unsupported."""


class TruncatedFileError(DisctokError):
    """File ended before the declared payload was complete."""


class NonFiniteValueError(DisctokError):
    """A feature matrix contains NaN or Inf."""


class ManifestError(DisctokError):
    """Manifest parsing or validation failure. Carries a line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionMismatchError(DisctokError):
    """Frame/centroid dimensionality disagreement."""


class EmptyInputError(DisctokError):
    """Operation requires a nonempty input."""


class InsufficientDataError(DisctokError):
    """Fewer distinct frames than requested clusters."""


class FingerprintMismatchError(DisctokError):
    """Token sequences produced by different codebooks were mixed."""


class ConfigError(DisctokError):
    """Invalid or unknown experiment configuration."""
