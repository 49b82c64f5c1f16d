"""Exception types shared across the package.

Three categories, matching the CLI exit codes: malformed input (2),
numerical failure (3), and configuration problems (4).
"""


class VarCausalError(Exception):
    """Base class for all package errors."""


class BadInputError(VarCausalError, ValueError):
    """Malformed or inconsistent caller input (dimensions, lengths, files)."""

    exit_code = 2


class NumericalError(VarCausalError, RuntimeError):
    """Numerical failure: unstable model, degenerate spectrum, solver breakdown."""

    exit_code = 3


class ConfigError(VarCausalError, ValueError):
    """Invalid configuration file or option value."""

    exit_code = 4
