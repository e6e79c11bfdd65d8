"""Exception hierarchy. CLI exit codes map onto these types."""


class SitaddaError(Exception):
    """Base class for all package errors."""


class ConfigError(SitaddaError):
    """Invalid configuration value or missing required setting."""


class DataError(SitaddaError):
    """Unreadable, unpaired, or otherwise invalid input data."""


class ShapeError(SitaddaError):
    """Image dimensions incompatible with a model's stride pyramid."""


class CheckpointError(SitaddaError):
    """Malformed or incompatible checkpoint container."""


class MetricError(SitaddaError):
    """A metric is undefined for the given inputs (e.g. constant image)."""


class SelectionError(SitaddaError):
    """No candidate survived the exclusion rules during auto-selection."""
