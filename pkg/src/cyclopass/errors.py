"""Exception hierarchy."""


class CyclopassError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(CyclopassError, ValueError):
    pass


class EvaluationError(CyclopassError, ArithmeticError):
    """A model evaluation produced a non-finite value."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class SingularHessian(CyclopassError, ArithmeticError):
    """The Hessian block of the transformed variables is (numerically) singular."""

    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class NoConvergence(CyclopassError, ArithmeticError):
    def __init__(self, message, iterations=0, residual=float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class StepFailure(CyclopassError, ArithmeticError):
    """The integrator produced a non-finite state."""


class TooStiff(CyclopassError, ArithmeticError):
    """Adaptive step size fell below the minimum allowed step."""


class DriftAlarm(CyclopassError):
    """A held output drifted away from its constant value."""


class StructureDeclarationError(CyclopassError):
    """Declared structure flags disagree with sampled numerical evidence."""


class ScenarioError(CyclopassError, ValueError):
    """Scenario file could not be parsed or validated."""
