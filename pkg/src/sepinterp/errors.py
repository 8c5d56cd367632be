"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Inputs have inconsistent or unsupported shapes."""


class ConfigurationError(ValueError):
    """A configuration value is invalid (e.g. even kernel size)."""


class CheckpointError(RuntimeError):
    """A checkpoint file is unreadable or has an incompatible version."""


class MissingWeightsError(FileNotFoundError):
    """Pretrained feature-extractor weights are not provisioned."""
