"""Exceptions raised when a hypothesis of the stabilization scheme is violated."""


class RobSTCError(Exception):
    """Base class for all package errors."""


class DomainError(RobSTCError, ValueError):
    """An evaluator was queried outside the set where it is defined."""


class EvaluatorError(RobSTCError, FloatingPointError):
    """An evaluator returned NaN or inf."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class EmptyPolytope(RobSTCError):
    """No input in the box satisfies every decay halfspace."""


class NoBoundExists(RobSTCError):
    """No positive measurement-error bound exists at a state.

    Raised when the decay coefficient at the measured state is nonnegative and
    no combination of inputs can compensate it; this means the CLF, decay rate
    or Lipschitz setup does not satisfy the stabilization hypotheses.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class GeometryInfeasible(RobSTCError):
    """Target, triggering and core radii are inconsistent with the accuracy."""


class NonPositiveDwell(RobSTCError):
    """The computed inter-execution time is not positive."""

    def __init__(self, message, state=None, eps_bar=None):
        super().__init__(message)
        self.state = state
        self.eps_bar = eps_bar


class ConfigError(RobSTCError):
    """Malformed or inconsistent configuration."""


class AccuracyInsufficient(RobSTCError):
    """The sensor accuracy is not below the required accuracy of the field."""
