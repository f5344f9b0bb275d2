"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or potential specification; message names the offending field."""


class WindowError(ValueError):
    """Evaluation or query outside the generated coverage window."""
