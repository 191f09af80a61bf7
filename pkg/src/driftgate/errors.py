"""Exception types shared across the package."""


class DriftgateError(Exception):
    """Base class for package errors."""


class DataError(DriftgateError):
    """Malformed or insufficient input data (bad file, gap, short history)."""


class ConfigError(DriftgateError):
    """Invalid configuration: unknown key, bad value, infeasible request."""


class InvariantError(DriftgateError):
    """An internal invariant failed.  Indicates a bug, not bad input."""
