"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised for invalid scenario, grid or model parameters."""


class HorizonError(ValueError):
    """Raised when a trajectory is queried outside ``[0, horizon]``."""
