"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration, CLI arguments, or config file contents (exit code 2)."""


class NumericalError(RuntimeError):
    """Numerical failure such as a rank-zero regression or oracle divergence (exit code 3)."""
