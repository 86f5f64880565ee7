"""Exception hierarchy shared by all modules.

Each class carries the process exit code the command line maps it to.
"""


class OrdpatError(Exception):
    exit_code = 1


class InvalidInputError(OrdpatError, ValueError):
    """Malformed arguments: short windows, non-finite values, bad indices."""

    exit_code = 2


class DataError(InvalidInputError):
    """Problems with ingested files: parse failures, duplicates, empty joins."""

    exit_code = 2


class DimensionError(InvalidInputError):
    """A pattern order exceeds the configured cap."""

    exit_code = 2


class DegenerateVarianceError(OrdpatError, ArithmeticError):
    """The summand series is constant, so studentization is impossible."""

    exit_code = 3

    def __init__(self, message, raw_statistic=None):
        super().__init__(message)
        self.raw_statistic = raw_statistic


class CalibrationRangeError(InvalidInputError):
    def __init__(self, message, achievable=None):
        super().__init__(message)
        self.achievable = achievable
