class ConfigError(ValueError):
    """Invalid network or training configuration."""


class DatasetTooSmall(ValueError):
    """Dataset has fewer samples than the configured minimum."""
