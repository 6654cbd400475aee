"""Exception hierarchy shared by every module.

The CLI maps these onto process exit codes, so raising the right class
matters: ConfigError -> 1, DataError -> 2, DegenerateDataError -> 3.
"""


class AuditError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(AuditError):
    """Invalid configuration, flags, or operation parameters."""

    exit_code = 1


class DataError(AuditError):
    """Malformed, missing, or insufficient input data."""

    exit_code = 2


class DegenerateDataError(AuditError):
    """Statistically degenerate input (e.g. all values tied, zero variance)."""

    exit_code = 3
