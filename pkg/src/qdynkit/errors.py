"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigurationError -> 2,
NumericError -> 3, CheckpointError/OSError -> 4.
"""


class QdynError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QdynError):
    """Invalid user input: bad parameters, malformed config, unknown models."""


class ShapeError(QdynError):
    """Array shape or grid mismatch."""


class NumericError(QdynError):
    """Numerical failure: non-convergence, overflow, precision unreachable."""


class RangeError(QdynError):
    """Query outside a tabulated function's abscissa range."""


class ResourceError(QdynError):
    """Problem size exceeds a configured cap."""


class UnsupportedError(QdynError):
    """Operation is valid in general but not for this configuration."""


class CheckpointError(QdynError):
    """Corrupt, truncated, or version-incompatible checkpoint data."""
