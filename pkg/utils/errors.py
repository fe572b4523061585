"""
Exception types shared by the library, the pipelines and the CLI.

Every error carries the process exit code the CLI uses for it.
"""


class ForenLabError(Exception):
    """Base class for all forenlab errors."""

    exit_code = 1


class ConfigError(ForenLabError, ValueError):
    """Invalid configuration value or unknown key."""

    exit_code = 2


class DimensionError(ConfigError):
    """Shapes or grid dimensions that do not fit together."""


class ContractError(ForenLabError):
    """An API was called outside of its contract."""

    exit_code = 2


class DataError(ForenLabError):
    """Missing, unreadable or incompatible data files."""

    exit_code = 3


class FormatError(DataError):
    """Malformed binary or text container."""

    def __init__(self, message: str, offset: int = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(ForenLabError, ArithmeticError):
    """NaN/inf during optimization or a numerically inconsistent result."""

    exit_code = 4

    def __init__(self, message: str, parameter: str = None, report=None):
        super().__init__(message)
        self.parameter = parameter
        self.report = report


class SymmetryError(NumericalError):
    """Inverse DFT left an imaginary residue, i.e. the spectrum was not conjugate-symmetric."""
