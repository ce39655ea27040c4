"""Exception hierarchy shared by all arrank modules."""

from __future__ import annotations


class ArrankError(Exception):
    """Base class for every error raised by arrank.

    ``stage`` is filled in by :func:`arrank.test_engine.run_test` when an
    error escapes one of the pipeline stages, so callers can tell which
    step failed without parsing the message.
    """

    stage: str | None = None

    def __str__(self) -> str:
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


class DomainError(ArrankError, ValueError):
    """Argument outside the mathematical domain of a function."""


class DataError(ArrankError, ValueError):
    """Malformed input data.

    Attributes
    ----------
    row : int or None
        1-based data row (header excluded) where the problem was found.
    column : str or None
        Column name involved.
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class TableParseError(DataError):
    """Delimited-text file could not be parsed."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class SingularDesignError(ArrankError):
    """The lagged design has (numerically) deficient column rank."""


class CollinearityError(ArrankError):
    """Regressors are (numerically) in the span of the lagged design."""


class IterationLimitError(ArrankError):
    """A simplex solver exceeded its pivot budget."""


class BreakpointCapError(IterationLimitError):
    """The parametric path exceeded its breakpoint cap; use a grid of cold solves."""


class ConfigError(ArrankError, ValueError):
    """Invalid simulation configuration."""


class StudyAbortedError(ArrankError):
    """Too many Monte Carlo replicates failed."""
