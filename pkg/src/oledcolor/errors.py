"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ParseError -> 2, ValidationError -> 3,
NumericalError -> 4.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class ParseError(ToolkitError):
    """A file could not be parsed. Carries location information."""

    def __init__(self, reason: str, path: str | None = None,
                 line: int | None = None, column: str | None = None):
        self.path = path
        self.line = line
        self.column = column
        self.reason = reason
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {reason}" if prefix else reason)


class ValidationError(ToolkitError):
    """Input violates a documented precondition or invariant."""


class DegenerateColorError(ValidationError):
    """A tristimulus with X+Y+Z = 0 was used where a direction is required."""


class DegenerateWhiteError(DegenerateColorError):
    """A reference white has a zero component."""


class MismatchedWhiteError(ValidationError):
    """Two Lab colors computed against different reference whites."""


class EmptyInputError(ValidationError):
    """An operation received an empty sequence."""


class TooFewSamplesError(ValidationError):
    """Fewer samples than the operation's minimum."""


class TooFewPanelsError(ValidationError):
    """Fewer panels than a cross-panel statistic needs."""


class NonUnitVectorError(ValidationError):
    """A direction vector is not unit length."""


class UnknownColorError(ValidationError):
    """A color id is absent from the panel or dataset."""


class InsufficientRepeatsError(ValidationError):
    """No (color, brightness) group has enough repeats; lists offenders."""


class MissingTimestampsError(ValidationError):
    """Time-series analysis requested on records without timestamps."""


class NumericalError(ToolkitError):
    """A numerically impossible or unstable computation was refused."""


class RankDeficiencyError(NumericalError):
    """Source measurements span fewer than 3 dimensions."""


class SingularSystemError(NumericalError):
    """Normal equations too ill-conditioned to solve reliably."""


class ZeroVarianceError(NumericalError):
    """A statistic that needs spread got identical samples."""
