"""Exception hierarchy.

Two families: :class:`ValidationError` (bad input, CLI exit code 2) and
:class:`EstimationError` (a numerical step could not proceed, exit code 3).
"""

from __future__ import annotations


class LateBoundsError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ValidationError(LateBoundsError, ValueError):
    exit_code = 2

    def __init__(self, message: str, *, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class EstimationError(LateBoundsError, ArithmeticError):
    exit_code = 3


# dataset validation
class EmptyArm(ValidationError):
    pass


class InvalidArm(ValidationError):
    pass


class OutOfRangeEngagement(ValidationError):
    pass


class ControlEngagement(ValidationError):
    pass


class NonFiniteOutcome(ValidationError):
    pass


class MissingValue(ValidationError):
    pass


class CovariateMismatch(ValidationError):
    pass


class ZeroInstrument(ValidationError):
    """Mean transformed engagement in the intervention arm is zero."""


# transforms
class DomainError(ValidationError):
    pass


class EndpointViolation(ValidationError):
    pass


class MonotonicityViolation(ValidationError):
    pass


class TransformSyntaxError(ValidationError):
    pass


# spline / knots
class KnotsNotAscending(ValidationError):
    pass


class TooFewDistinct(ValidationError):
    pass


# configuration / inputs
class ConfigError(ValidationError):
    pass


class NonPositiveThreshold(ValidationError):
    pass


class ConflictingInputs(ValidationError):
    pass


class ScenarioParseError(ValidationError):
    def __init__(self, message: str, *, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# estimation
class DegenerateArm(EstimationError):
    pass


class RankDeficient(EstimationError):
    pass


class DegenerateResiduals(EstimationError):
    pass


class ZeroDenominator(EstimationError):
    pass


class ZeroVariance(EstimationError):
    pass


class TooManyDegenerateResamples(EstimationError):
    pass


class NullEcce(EstimationError):
    pass


class NonInvertibleTransform(EstimationError):
    pass


class IterationError(EstimationError):
    """Wraps an estimator failure inside a Monte Carlo iteration."""

    def __init__(self, iteration: int, cause: Exception):
        self.iteration = iteration
        self.cause = cause
        super().__init__(f"iteration {iteration}: {type(cause).__name__}: {cause}")
