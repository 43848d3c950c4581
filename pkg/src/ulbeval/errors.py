"""Exception types shared across the package."""


class UlbevalError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(UlbevalError):
    """Malformed input line in a dataset or run file.

    Carries the 1-based line number so CLI messages can point at the
    offending line.
    """

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CoverageError(UlbevalError):
    """A run is missing queries or references documents the corpus lacks."""


class TractabilityError(UlbevalError):
    """Exhaustive enumeration would exceed the configured prefix limit."""


class BoundsError(UlbevalError):
    """A metric value violates its bounds beyond numeric slack."""
