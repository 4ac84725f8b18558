"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed numerical input (non-finite entries, zero rows, ...)."""


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` names the offending setting."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
