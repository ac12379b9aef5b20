"""Exception types shared across the package."""


class CliffordError(Exception):
    pass


class ParseError(CliffordError, ValueError):
    """Malformed Lagrangian text. ``position`` is the 0-based character offset."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class EvaluationError(CliffordError, ArithmeticError):
    """Division by zero, overflow or a non-finite result during evaluation."""


class DegenerateLagrangian(CliffordError):
    """The coordinate Hessian is singular (or too ill-conditioned) at a state.

    ``step`` and ``trajectory`` are filled in when raised from an integration.
    """

    def __init__(self, message, condition=None, step=None, trajectory=None):
        super().__init__(message)
        self.condition = condition
        self.step = step
        self.trajectory = trajectory


class NonFiniteState(CliffordError):
    def __init__(self, message, step=None, trajectory=None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory
