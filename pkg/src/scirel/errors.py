"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericError -> 3.
"""


class ScirelError(Exception):
    pass


class ConfigError(ScirelError):
    """Invalid configuration or usage."""


class DataError(ScirelError):
    """Malformed or inconsistent input data."""


class NumericError(ScirelError):
    """Non-finite value produced by a numeric operation."""
