"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameter, catalog id, or config file entry."""


class GridMismatchError(ValueError):
    """Operands live on different grids."""
