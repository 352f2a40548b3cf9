"""Densities on the nonnegative half-line that are infinitely divisible or
generalised gamma convolutions, the Laplace/Levy transform operators
connecting them, and a machine-checkable catalog of their commutative
diagrams."""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    DivergentError,
    DomainError,
    NegativeDensityError,
    ParamsError,
    PoleError,
    QuadratureError,
    StrategyDisagreementError,
    UnknownDiagramError,
)
from .handles import Atom, DensityHandle, FamilyId, Params, PoleComponent, TransformHandle

__all__ = [
    "__version__",
    "Atom",
    "DensityHandle",
    "FamilyId",
    "Params",
    "PoleComponent",
    "TransformHandle",
    "ConvergenceError",
    "DivergentError",
    "DomainError",
    "NegativeDensityError",
    "ParamsError",
    "PoleError",
    "QuadratureError",
    "StrategyDisagreementError",
    "UnknownDiagramError",
]
