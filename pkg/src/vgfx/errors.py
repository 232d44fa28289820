"""Exception hierarchy. ``exit_code`` is the CLI contract (2 config, 3 I/O, 4 numerical)."""


class VgfxError(Exception):
    exit_code = 1


class ConfigError(VgfxError, ValueError):
    exit_code = 2


class InvalidExponent(ConfigError):
    pass


class StyleMismatch(ConfigError):
    pass


class DataError(VgfxError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class EmptySeries(DataError):
    pass


class DuplicateQuote(DataError):
    pass


class MissingStrike(DataError):
    pass


class NumericalError(VgfxError, ArithmeticError):
    exit_code = 4


class NotPositiveDefinite(NumericalError):
    pass


class EmptyBins(NumericalError):
    pass


class DegenerateRange(NumericalError):
    pass


class DegenerateRegressionWarning(RuntimeWarning):
    """Too few in-the-money paths to fit the continuation regression at a step."""
