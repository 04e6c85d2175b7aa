"""Exception types shared across the package."""


class LabError(Exception):
    """Base class for all package-specific errors."""


class InvalidFieldError(LabError, ValueError):
    """A field payload is malformed (wrong shape/dtype or non-finite entries)."""


class GridMismatchError(LabError, ValueError):
    """Two fields living on different grids were combined."""


class ParameterError(LabError, ValueError):
    """A parameter violates its documented bound."""


class BlowUpError(LabError, ArithmeticError):
    """Time stepping produced a non-finite state."""


class ConfigError(LabError, ValueError):
    """A config file is malformed or contains unknown/out-of-range entries."""


class CheckpointFormatError(LabError, ValueError):
    """A checkpoint header is not recognized."""


class CheckpointCorruptError(LabError, ValueError):
    """A checkpoint file is truncated or otherwise damaged past the header."""
