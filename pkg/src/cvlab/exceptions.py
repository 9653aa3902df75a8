"""Exception hierarchy shared by every cvlab module."""


class CvlabError(Exception):
    """Base class for all errors raised by cvlab."""


class DimensionError(CvlabError, ValueError):
    """Operands have incompatible shapes."""


class DomainError(CvlabError, ValueError):
    """An input lies outside the domain of an operation."""


class ModelError(CvlabError):
    """A measurement model violates a structural requirement (e.g. completeness)."""


class DegenerateError(CvlabError):
    """A probability that must be nonzero vanished."""


class DegenerateOutcomeError(DegenerateError):
    """A measurement outcome has (numerically) zero probability."""


class DegeneratePostselectionError(DegenerateError):
    """The postselection probability vanished."""


class ExprSyntaxError(CvlabError, SyntaxError):
    """Malformed parameter expression."""

    def __init__(self, message, text="", position=0):
        super().__init__(f"{message} at position {position}")
        self.text = text
        self.position = position


class EvaluationError(CvlabError, ArithmeticError):
    """A parameter expression could not be evaluated at the requested ``g``."""


class ScenarioError(CvlabError):
    """A scenario file is malformed or fails validation."""
