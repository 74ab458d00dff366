"""Exception hierarchy shared across the package.

The CLI maps these onto its exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class KgsaError(Exception):
    """Base class for all package errors."""


class ConfigError(KgsaError):
    """Invalid configuration or incompatible option combination."""


class DataError(KgsaError):
    """Malformed, non-finite or otherwise unusable input data."""


class NumericalError(KgsaError):
    """A numerical procedure failed or reached a degenerate state."""


class MissingSubsetError(KgsaError, KeyError):
    """An index table lacks an entry required by a decomposition."""
