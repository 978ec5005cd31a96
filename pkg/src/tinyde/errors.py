"""Exception hierarchy shared across the package."""


class TinyDEError(Exception):
    """Base class for all package errors."""


class DimensionError(TinyDEError, ValueError):
    """Shapes do not conform for the requested operation."""


class DegenerateInputError(TinyDEError, ValueError):
    """Input is structurally valid but statistically degenerate (e.g. empty
    reduction extent, batch too small for batch statistics)."""


class ModeError(TinyDEError, RuntimeError):
    """Operation invoked on a model in the wrong operating mode."""


class StateError(TinyDEError, RuntimeError):
    """Operation invoked against inconsistent or forbidden mutable state."""


class ConfigError(TinyDEError, ValueError):
    """Invalid experiment or training configuration."""


class DataError(TinyDEError, ValueError):
    """Dataset ingestion or integrity failure."""
