"""Exception hierarchy shared by every stage of the mining pipeline."""

from __future__ import annotations


class MinerError(ValueError):
    """Base class; every subclass maps to CLI exit status 2."""

    kind = "error"


class ConfigError(MinerError):
    kind = "config"


class ValidationError(MinerError):
    kind = "validation"


class ParseError(ValidationError):
    kind = "parse"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(ValidationError):
    kind = "format"


class TruncationError(ValidationError):
    kind = "truncation"


class DataError(ValidationError):
    kind = "data"


class DegenerateInputError(ValidationError):
    kind = "degenerate"

    def __init__(self, message: str, row: int):
        self.row = row
        super().__init__(message)
