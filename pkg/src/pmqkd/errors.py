"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so the CLI can exit
with a stable diagnostic tag.
"""


class PmqkdError(Exception):
    """Base class for all package errors."""

    code = "internal"


class DomainError(PmqkdError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    code = "domain"


class SchemaError(PmqkdError, ValueError):
    """A data file violates the tally CSV schema."""

    code = "schema"

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NoDataError(PmqkdError, RuntimeError):
    """An operation that needs observed counts received an empty dataset."""

    code = "no-data"


class UndefinedRateError(PmqkdError, ArithmeticError):
    """A rate or ratio is undefined for the given inputs (zero denominator)."""

    code = "undefined-rate"
