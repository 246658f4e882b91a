"""Exception types raised across the package.

Every error derives from ``HarmonError`` so callers (and the CLI) can catch
the whole family at once.  Data problems and training aborts get their own
branches because the CLI maps them to distinct exit codes.
"""


class HarmonError(Exception):
    """Base class for all package errors."""


class ConfigError(HarmonError, ValueError):
    """A parameter is outside its allowed range."""


class DataError(HarmonError):
    """Input data is malformed or insufficient."""


class ParseError(DataError):
    """A CSV or JSON file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class CalibrationError(DataError):
    """The two calibration postures do not determine a z-axis scale."""


class FilterDesignError(HarmonError):
    """The requested filter cannot be realized."""


class InsufficientDataError(DataError):
    """Too few samples for the requested statistic."""


class StratificationError(DataError):
    """A class has fewer samples than the number of folds."""


class DecodeError(DataError):
    """A network output cannot be mapped to a class code."""


class ModelFormatError(DataError):
    """A model file is corrupt, has an unsupported version, or mismatches the data."""


class TrainingAbort(HarmonError):
    """Training produced a non-finite error and was stopped."""
