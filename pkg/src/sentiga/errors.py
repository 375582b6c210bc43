"""Exception hierarchy shared by the library and the command line."""


class SentigaError(Exception):
    """Base class for all package errors."""


class DataError(SentigaError, ValueError):
    """Input data is malformed, out of range or does not cover a window."""


class MalformedRowError(DataError):
    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {reason}")


class CalendarMismatchError(DataError):
    """Series that must share a trading calendar do not."""


class InsufficientDataError(DataError):
    """Too few observations for the requested statistic."""


class DegenerateSeriesError(SentigaError, ArithmeticError):
    """The series has zero dispersion, so a ratio statistic is undefined."""


class InvalidChromosomeError(SentigaError, ValueError):
    """A chromosome violates the at-least-one-condition-per-arm rule."""


class InfeasibleError(SentigaError, ValueError):
    """The portfolio problem has no feasible point."""


class NotPSDError(SentigaError, ValueError):
    """Covariance matrix is indefinite beyond tolerance."""
