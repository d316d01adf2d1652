"""
Exception hierarchy for the disturbance control framework.
"""

from typing import Any, Optional


class DpcError(Exception):
    """Base class for all framework errors."""


class InvalidArgumentError(DpcError, ValueError):
    """Raised when a value is non-finite, out of range or malformed."""


class DimensionError(InvalidArgumentError):
    """Raised when array shapes do not match."""


class NoStanceError(DpcError):
    """Raised when dynamics are requested with every foot in swing."""


class ParameterError(DpcError):
    """Raised for physically invalid robot parameters."""


class StaleTapeError(DpcError):
    """Raised when a tape is replayed after its parameters changed."""


class ControllerFault(DpcError):
    """Raised when the stance force QP cannot produce a usable solution."""

    def __init__(self, message: str, solution: Optional[Any] = None):
        super().__init__(message)
        self.solution = solution


class EmptyDatasetError(DpcError):
    """Raised when training is requested on an empty dataset or buffer."""


class ConfigError(DpcError):
    """Raised for invalid or unknown configuration keys."""


class MissingArtifactError(DpcError):
    """Raised when a dataset or checkpoint file does not exist."""


class CheckpointError(DpcError):
    """Raised when a checkpoint file is malformed or incompatible."""
