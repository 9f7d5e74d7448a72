"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor or layer shapes are incompatible."""


class ConfigError(ValueError):
    """A config document is malformed, has unknown keys, or bad values."""


class ManifestError(RuntimeError):
    """A dataset manifest row cannot be loaded."""


class AlreadyRegisteredError(ValueError):
    """A class label was added to a registry twice."""


class InvalidStateError(RuntimeError):
    """An operation was applied to stale or inconsistent state."""


class IncompleteLogError(ValueError):
    """An experiment log is missing records required by a metric."""


class VersionError(RuntimeError):
    """A persisted artifact was written by an incompatible schema version."""
