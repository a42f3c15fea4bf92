"""Exception hierarchy shared across the package.

Every error raised by gridrestore derives from :class:`GridRestoreError` so
callers (and the CLI) can distinguish our failures from genuine bugs.
"""

from __future__ import annotations


class GridRestoreError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GridRestoreError):
    """Input file is not well-formed JSON or misses required structure."""


class ValidationError(GridRestoreError):
    """A parsed record violates a model invariant.

    Attributes:
        record: identifier of the offending record (bus id, line id, ...).
        field: name of the offending field, when known.
    """

    def __init__(self, message: str, record: str | None = None, field: str | None = None):
        super().__init__(message)
        self.record = record
        self.field = field


class UnknownLine(ValidationError):
    """A scenario references a line id absent from the feeder."""


class DimensionError(ValidationError):
    """An array input has the wrong shape (travel matrix, profile length)."""


class InfeasibleBounds(GridRestoreError):
    """Aggregated voltage bounds crossed; no feasible voltage band remains."""


class ModelError(GridRestoreError):
    """Model construction failed (inconsistent horizon, missing series, ...)."""


class MissingParameter(ModelError):
    """A required physical parameter is absent (e.g. storage resistances)."""


class Infeasible(GridRestoreError):
    """The optimization problem admits no feasible point."""


class Unbounded(GridRestoreError):
    """The optimization problem is unbounded below."""


class SolverFailure(GridRestoreError):
    """The continuous backend failed for a non-numerical reason."""


class NumericalFailure(SolverFailure):
    """The continuous backend broke down numerically.

    Attributes:
        node_dump: JSON string of the offending subproblem, for offline replay.
    """

    def __init__(self, message: str, node_dump: str | None = None):
        super().__init__(message)
        self.node_dump = node_dump


class TooLarge(GridRestoreError):
    """Instance exceeds the deliberate size bounds of exhaustive routines."""
