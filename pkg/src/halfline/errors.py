"""Exception and warning taxonomy shared by all numeric modules."""


class HalflineError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(HalflineError, ValueError):
    """Argument outside the documented domain of an operation."""


class PoleError(DomainError):
    """Evaluation requested exactly at a pole (e.g. gamma at 0, -1, -2, ...)."""


class ParamsError(DomainError):
    """Invalid or inconsistent distribution parameters."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConvergenceError(HalflineError):
    """A series or iteration failed to reach the requested tolerance.

    Carries the best available estimates so callers can inspect how far
    off the computation was.
    """

    def __init__(self, message: str, estimates=None):
        super().__init__(message)
        self.estimates = estimates or {}


class QuadratureError(HalflineError):
    """Adaptive quadrature exhausted its refinement budget."""


class DivergentError(HalflineError):
    """The requested integral does not converge."""


class NegativeDensityError(HalflineError):
    """A quantity that must be a density came out significantly negative."""


class StrategyDisagreementError(HalflineError):
    """Two independent evaluation strategies disagree beyond tolerance."""

    def __init__(self, message: str, values=None):
        super().__init__(message)
        self.values = values or {}


class UnknownDiagramError(HalflineError, KeyError):
    """Diagram identifier not present in the catalog."""


class NonIdWarning(UserWarning):
    """The transform handed to a descent arrow is not infinitely divisible
    at the probed point (negative log-derivative)."""


class NegativeDensityWarning(UserWarning):
    """An inversion produced values below -tol; usually a branch-cut
    mistake upstream."""
