"""
Exception hierarchy for the numerical core and the CLI.

Every error carries the process exit code the CLI maps it to:
2 for input/precondition problems, 3 for numerical divergence.
"""
from typing import Any, Optional


class GenInvLeavesError(Exception):
    """Root of all library errors."""
    exit_code = 1


class PreconditionError(GenInvLeavesError):
    """An operation was called outside its documented domain."""
    exit_code = 2


class InvalidInputError(PreconditionError, ValueError):
    """Malformed operand: non-finite entries, wrong shape, mismatched ambient."""


class NotComplementaryError(PreconditionError):
    """Two subspaces do not form a direct sum of the ambient space."""


class DegenerateSplitError(PreconditionError):
    """Restriction of an operator to a prescribed complement is singular."""


class OutOfBallError(PreconditionError):
    """Operand lies outside the ball in which the formulas are valid."""

    def __init__(self, message: str, distance: float = float("nan"), radius: float = float("nan")):
        super().__init__(message)
        self.distance = distance
        self.radius = radius


class NoInverseInBallError(PreconditionError):
    """R(T) meets N(A+) so B = A+ C^-1 is not a generalized inverse of T."""


class NotCofinalError(PreconditionError):
    """M(x) is not complementary to E*; carries the queried point."""

    def __init__(self, message: str, point: Any = None):
        super().__init__(message)
        self.point = point


class NeedsSplittingError(PreconditionError):
    """An operator point has no generalized inverse attached."""


class NotInSError(PreconditionError):
    """X does not admit the generalized inverse A+ C^-1(A+, X)."""


class InvalidDirectionError(PreconditionError):
    """A tangent direction does not lie in M(A)."""


class NotGeneralizedRegularError(PreconditionError):
    """Sampling found a point near x0 where R(T_x) meets N(T0+)."""

    def __init__(self, message: str, witness: Any = None):
        super().__init__(message)
        self.witness = witness


class OutOfNeighborhoodError(PreconditionError):
    """D_T0(T0+, T_x) is numerically singular at the queried point."""

    def __init__(self, message: str, point: Any = None):
        super().__init__(message)
        self.point = point


class FamilyEvaluationError(PreconditionError):
    """A caller-supplied evaluator raised; carries the sample coordinate."""

    def __init__(self, message: str, point: Any = None):
        super().__init__(message)
        self.point = point


class ProblemFileError(PreconditionError):
    """Parse or validation failure in a problem file."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalDivergenceError(GenInvLeavesError):
    """An iterative computation left its domain or failed to converge."""
    exit_code = 3


class DivergenceError(NumericalDivergenceError):
    """Non-finite state during leaf integration."""

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial


class AbortedLeafError(NumericalDivergenceError):
    """The alpha field failed mid-integration; carries the partial sample."""

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial


class InverseFailureError(NumericalDivergenceError):
    """Newton inversion did not converge."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class DegenerateConstraintWarning(UserWarning):
    """Criticality requested against an empty tangent basis."""
