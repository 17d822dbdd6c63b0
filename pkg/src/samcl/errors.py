"""Exception hierarchy shared by every subsystem.

Each class carries an ``exit_code`` and ``category`` so the command line can map
failures onto stable process exit statuses without string matching.
"""

from __future__ import annotations


class SamclError(Exception):
    exit_code = 1
    category = "error"


class ConfigError(SamclError):
    """Run configuration failed validation; ``pointer`` is a JSON pointer."""

    exit_code = 2
    category = "config"

    def __init__(self, message: str, pointer: str = ""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


class FormatError(SamclError):
    """A binary or text file could not be parsed."""

    exit_code = 3
    category = "format"

    def __init__(self, message: str, offset: int | None = None, path: str | None = None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte offset {offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class CheckpointMissingError(SamclError):
    exit_code = 3
    category = "checkpoint"


class NumericError(SamclError):
    exit_code = 4
    category = "numeric"


class SingularityError(NumericError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, pivot: int, message: str | None = None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (failing pivot index {pivot})")


class DivergenceError(NumericError):
    category = "divergence"


class GradcheckFailure(NumericError):
    category = "gradcheck"


class ContractViolation(SamclError, ValueError):
    """Inputs broke an operation's precondition (shapes, ranges, labels)."""

    exit_code = 5
    category = "contract"


class StatisticsUnavailableError(ContractViolation):
    """Foreground or background region is empty so its mean is undefined."""


class DegenerateRangeError(ContractViolation):
    """Min-max normalization of a constant image."""
