"""Domain types shared by the transform operators, the density catalog and
the diagram verifier.

A :class:`DensityHandle` is an evaluable function on the open half-line
(plus optional point masses); a :class:`TransformHandle` is an evaluable
function of the Laplace variable with optional analytic extras (negative-ray
evaluator, complex evaluator, closed-form derivative, explicit pole
components). The extras gate which diagram arrows can be applied to a
handle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ParamsError

DIVERGENT = "divergent"


def ray_points(t) -> np.ndarray:
    """Points s = e^{-i pi} t on the principal branch, i.e. -t with a
    *negative* zero imaginary part so that numpy's log/sqrt/power pick the
    lower side of the cut."""
    t = np.asarray(t, dtype=float)
    return -(t + 0j)


def below_axis(v) -> np.ndarray:
    """Real values approached from below the cut: v - i0.

    IEEE addition destroys the sign of zero (``a + (-0j)`` has ``+0j``), so
    every branch-sensitive base of the form ``c + s`` with ``s = e^{-i pi} t``
    must be rebuilt with this helper rather than computed by addition.
    """
    z = np.empty(np.shape(v), dtype=complex)
    z.real = v
    z.imag = -0.0
    return z


@dataclass(frozen=True)
class Atom:
    """Point mass ``mass * delta(x - location)``."""

    location: float
    mass: float

    def __post_init__(self):
        if self.location < 0:
            raise ParamsError("location", "atom location must be >= 0")
        if self.mass <= 0:
            raise ParamsError("mass", "atom mass must be > 0")


@dataclass(frozen=True)
class PoleComponent:
    """A term ``w * (a + s)**-p`` of a transform (p=1: simple pole at -a).

    These carry the structure needed for exact inversion rules: the inverse
    Laplace transform is ``w x^{p-1} e^{-a x} / Gamma(p)`` and, under the
    Thorin inversion, a simple pole contributes the atom ``w delta(t - a)``.
    """

    a: float
    w: float
    p: float = 1.0

    def eval(self, s):
        return self.w * (self.a + s) ** (-self.p)

    def eval_ray(self, t) -> np.ndarray:
        """w (a + e^{-i pi} t)^-p on the lower side of the cut."""
        t = np.asarray(t, dtype=float)
        return self.w * below_axis(self.a - t) ** (-self.p)

    def inverse_density(self, x):
        x = np.asarray(x, dtype=float)
        return (self.w * x ** (self.p - 1.0) * np.exp(-self.a * x)
                / math.gamma(self.p))

    @property
    def thorin_atom(self) -> Optional[Atom]:
        if abs(self.p - 1.0) < 1e-12:
            return Atom(self.a, self.w)
        return None


@dataclass
class DensityHandle:
    """Evaluable nonnegative function on x > 0 with metadata.

    ``eval`` must accept ndarray input. ``origin_exponent`` g means the
    function behaves like ``c x^{g-1}`` near 0 (quadrature hint);
    ``tail_scale`` is a decay-scale hint for semi-infinite quadrature.
    ``family`` maps a shape value to the constant-free member of the
    family this handle belongs to (used by the limit-descent arrow);
    ``shape`` is this handle's own shape value.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float] = (0.0, math.inf)
    atoms: tuple[Atom, ...] = ()
    normalization: str = "probability"  # or "unnormalized"
    nonneg: bool = True
    origin_exponent: float = 1.0
    tail_scale: float = 1.0
    family: Optional[Callable[[float], "DensityHandle"]] = None
    shape: Optional[float] = None
    # quadrature hints: interior kinks/singular points, and a generator of
    # oscillation panel edges (start -> increasing edge list)
    breakpoints: tuple[float, ...] = ()
    osc_edges: Optional[Callable[[float], list]] = None
    label: str = ""

    def __call__(self, x):
        scalar = np.ndim(x) == 0
        out = self.eval(np.atleast_1d(np.asarray(x, dtype=float)))
        out = np.asarray(out, dtype=float)
        return float(out[0]) if scalar else out

    @property
    def atom_at_zero(self) -> float:
        return sum(a.mass for a in self.atoms if a.location == 0.0)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.support[1])

    def with_(self, **kw) -> "DensityHandle":
        return replace(self, **kw)


@dataclass
class TransformHandle:
    """Evaluable function of the Laplace variable with analytic extras.

    ``eval_real`` covers s > 0 (vectorized). ``eval_on_negative_ray``
    evaluates F(e^{-i pi} t) on the principal branch; ``eval_complex``
    extends to Re s >= 0 where available (enables complex-step
    differentiation). ``poles`` lists explicit ``w (a+s)^-p`` components
    *included* in ``eval_real``; inversion subtracts them along the ray and
    adds their exact inverses. ``origin_exponent`` g means F ~ c s^{g-1} as
    s -> 0 (g > 0 iff the Laplace-exponent integral converges at 0;
    normalized transforms have g = 1).
    """

    eval_real: Callable[[np.ndarray], np.ndarray]
    eval_on_negative_ray: Optional[Callable[[np.ndarray], np.ndarray]] = None
    eval_complex: Optional[Callable] = None
    closed_deriv: Optional[Callable] = None
    kind: str = "closed_form"  # or "quadrature_backed"
    value_at_zero: object = None  # float, None (unknown) or DIVERGENT
    poles: tuple[PoleComponent, ...] = ()
    origin_exponent: float = 1.0
    ray_breakpoints: tuple[float, ...] = ()
    ray_osc_phase_inv: Optional[Callable[[float], float]] = None
    ray_tail_scale: float = 1.0
    # inverse density treated as 0 below this x (left tails that fall below
    # double range, or where the oscillatory ray integral is unresolvable
    # and provably negligible)
    inverse_x_floor: float = 0.0
    label: str = ""

    def __call__(self, s):
        scalar = np.ndim(s) == 0
        out = self.eval_real(np.atleast_1d(np.asarray(s, dtype=float)))
        out = np.asarray(out, dtype=float)
        return float(out[0]) if scalar else out

    def ray(self, t):
        if self.eval_on_negative_ray is None:
            raise ValueError(f"transform {self.label!r} has no ray evaluator")
        scalar = np.ndim(t) == 0
        out = np.asarray(
            self.eval_on_negative_ray(np.atleast_1d(np.asarray(t, dtype=float))),
            dtype=complex,
        )
        return complex(out[0]) if scalar else out

    @property
    def is_normalized(self) -> bool:
        return self.value_at_zero == 1 or self.value_at_zero == 1.0

    def with_(self, **kw) -> "TransformHandle":
        return replace(self, **kw)

    def cm_divided_differences(self, grid: Sequence[float]):
        """First and second divided differences on ``grid`` (a necessary
        condition for complete monotonicity is d1 <= 0 and d2 >= 0)."""
        s = np.asarray(sorted(grid), dtype=float)
        v = self(s)
        d1 = np.diff(v) / np.diff(s)
        d2 = np.diff(d1) / (s[2:] - s[:-2]) * 2.0
        return d1, d2


# ---------------------------------------------------------------------------
# parameter bundle
# ---------------------------------------------------------------------------

_FAMILY_FIELDS: dict[str, tuple[str, ...]] = {
    "gamma": ("mu", "lam"),
    "stable": ("alpha", "mu"),
    "gamma_conv": ("mu", "lam", "mu2", "lam2"),
    "extended_beta": ("a", "b"),
    "first_passage": ("mu",),
    "frac_gamma": ("alpha", "lam", "mu"),
    "h_family": ("alpha", "theta", "mu"),
    "stable_mixture": ("alpha", "beta", "mu"),
}

FAMILY_TAGS = tuple(sorted(_FAMILY_FIELDS))


@dataclass(frozen=True)
class Params:
    """Parameter tuple shared by the density catalog.

    Per-family validity: ``alpha, beta`` in (0,1); ``mu > 0``; ``lam >= 0``;
    ``0 <= theta < alpha``. ``mu2, lam2`` extend the tuple for two-component
    gamma convolutions; ``a, b`` are the beta shapes. Fields a family does
    not read must be left at None.
    """

    alpha: Optional[float] = None
    beta: Optional[float] = None
    theta: Optional[float] = None
    mu: Optional[float] = None
    lam: Optional[float] = None
    mu2: Optional[float] = None
    lam2: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None

    def validate(self, family: str) -> "Params":
        if family not in _FAMILY_FIELDS:
            raise ParamsError("family", f"unknown family {family!r}")
        needed = _FAMILY_FIELDS[family]
        for name in needed:
            if getattr(self, name) is None:
                raise ParamsError(name, f"required by family {family!r}")
        for name in ("alpha", "beta", "theta", "mu", "lam", "mu2", "lam2",
                     "a", "b"):
            if name not in needed and getattr(self, name) is not None:
                raise ParamsError(
                    name, f"not read by family {family!r}; must be absent"
                )
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if v is not None and not (0.0 < v < 1.0):
                raise ParamsError(name, f"must lie in (0, 1), got {v}")
        for name in ("mu", "mu2", "a", "b"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ParamsError(name, f"must be > 0, got {v}")
        for name in ("lam", "lam2"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ParamsError(name, f"must be >= 0, got {v}")
        if self.theta is not None:
            if self.alpha is None or not (0.0 <= self.theta < self.alpha):
                raise ParamsError(
                    "theta", f"must satisfy 0 <= theta < alpha, got {self.theta}"
                )
        return self

    @staticmethod
    def required_fields(family: str) -> tuple[str, ...]:
        return _FAMILY_FIELDS[family]


@dataclass(frozen=True)
class FamilyId:
    """Catalog key; the tag fixes which Params fields are read."""

    tag: str

    def __post_init__(self):
        if self.tag not in _FAMILY_FIELDS:
            raise ParamsError("tag", f"unknown family tag {self.tag!r}")

    @property
    def required_params(self) -> tuple[str, ...]:
        return _FAMILY_FIELDS[self.tag]
