"""Exception types shared across the package.

Plain ``ValueError`` is used for contract violations (bad shapes, bad
arguments); the classes below mark failures a caller may want to handle
separately.
"""


class ConfigurationError(ValueError):
    """A configuration is structurally invalid (e.g. grid too large)."""


class NumericError(RuntimeError):
    """A numerical routine failed to meet its tolerance."""


class IngestionError(RuntimeError):
    """A dataset on disk does not match its published layout."""
