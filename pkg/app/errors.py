"""
Error taxonomy for the FWI engine.

Every error raised on purpose by the services derives from `FwiError` and carries
an `ErrorCategory`; the CLI maps the category to its process exit code.
"""

from enum import Enum


class ErrorCategory(Enum):
    """Error classes exposed to callers, each with its own exit code."""

    USAGE = "usage"
    INPUT = "input"
    NUMERICAL = "numerical"
    IO = "io"
    INTERNAL = "internal"

    @property
    def exit_code(self) -> int:
        return {
            ErrorCategory.USAGE: 2,
            ErrorCategory.INPUT: 3,
            ErrorCategory.NUMERICAL: 4,
            ErrorCategory.IO: 5,
            ErrorCategory.INTERNAL: 1,
        }[self]


class FwiError(Exception):
    """Base class of all engine errors."""

    category = ErrorCategory.INTERNAL


class GridError(FwiError, ValueError):
    category = ErrorCategory.INPUT


class DimensionMismatchError(FwiError, ValueError):
    category = ErrorCategory.INPUT


class SurveyError(FwiError, ValueError):
    category = ErrorCategory.INPUT


class GuardRailError(FwiError):
    category = ErrorCategory.USAGE


class SingularPivotError(FwiError):
    """Exact LU hit a zero pivot; `index` is the offending row when known."""

    category = ErrorCategory.NUMERICAL

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ZeroPivotError(FwiError):
    """ILU hit a zero pivot at row `index`; retry with a diagonal shift."""

    category = ErrorCategory.NUMERICAL

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class CgBreakdownError(FwiError):
    """Non-positive curvature found by CG: the operator is not HPD."""

    category = ErrorCategory.NUMERICAL

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


class FileFormatError(FwiError):
    """A file could not be parsed; names the field and line when known."""

    category = ErrorCategory.INPUT

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        location = []
        if field is not None:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.field = field
        self.line = line


class InversionError(FwiError):
    """A Gauss-Newton step failed at the given frequency index."""

    category = ErrorCategory.NUMERICAL

    def __init__(self, message: str, frequency_index: int):
        super().__init__(f"frequency #{frequency_index}: {message}")
        self.frequency_index = frequency_index


class UsageError(FwiError):
    """Invalid combination of command-line arguments."""

    category = ErrorCategory.USAGE
