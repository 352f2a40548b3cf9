"""Density catalog: gamma, positive stable, gamma convolutions, extended
beta, first passage, fractional gamma and its Thorin companions, the tilted
h family, and stable mixtures.

Each family is available at two levels: plain value functions (returning
:class:`~halfline.specfun.EvalResult` where an evaluation strategy was
chosen) and handle builders returning ``(DensityHandle, TransformHandle)``
pairs with the analytic extras (ray evaluators, pole components, closed
derivatives, shape-family hooks) the diagram verifier needs.
"""

from __future__ import annotations

import math
from typing import Optional

import mpmath as mp
import numpy as np

from .errors import ConvergenceError, DomainError, StrategyDisagreementError
from .handles import (
    Atom,
    DIVERGENT,
    DensityHandle,
    Params,
    PoleComponent,
    TransformHandle,
    below_axis,
    ray_points,
)
from .quadrature import integrate_0_inf, sum_series, sum_series_checked, tanh_sinh
from .specfun import (
    EvalResult,
    bessel_i_scaled,
    erfcx,
    erfcx_array,
    kummer_m,
    kummer_m_scaled,
    mittag_leffler,
    mittag_leffler_deriv,
    parabolic_cylinder_d_scaled,
)

_SQRT_PI = math.sqrt(math.pi)


def _sinpi(u: float) -> float:
    return math.sin(math.pi * math.fmod(u, 2.0))


# ---------------------------------------------------------------------------
# gamma
# ---------------------------------------------------------------------------

def gamma_pdf(mu: float, lam: float, x) -> float | np.ndarray:
    """Gamma density with shape mu and decay lam.

    For lam = 0 the normalizer is omitted: x^(mu-1)/Gamma(mu), the
    unnormalized frame in which the shape-0 limit stays well defined.
    """
    if mu <= 0:
        raise DomainError(f"gamma shape must be > 0, got {mu}")
    if lam < 0:
        raise DomainError(f"gamma decay must be >= 0, got {lam}")
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    lead = mu * math.log(lam) if lam > 0 else 0.0
    with np.errstate(divide="ignore"):
        out = np.exp(lead + (mu - 1.0) * np.log(x_arr) - lam * x_arr
                     - math.lgamma(mu))
    return float(out[0]) if np.ndim(x) == 0 else out


def gamma_handles(mu: float, lam: float) -> tuple[DensityHandle, TransformHandle]:
    norm = "probability" if lam > 0 else "unnormalized"
    scale = lam ** mu if lam > 0 else 1.0
    label = f"gamma(mu={mu:g},lam={lam:g})"

    d = DensityHandle(
        eval=lambda x: gamma_pdf(mu, lam, np.asarray(x)),
        normalization=norm,
        origin_exponent=mu,
        tail_scale=(mu + 1.0) / lam if lam > 0 else 8.0,
        family=lambda nu: gamma_handles(nu, lam)[0],
        shape=mu,
        label=label,
    )

    def ev(s):
        return scale * (lam + np.asarray(s)) ** (-mu)

    def ray(t):
        return scale * below_axis(lam - np.asarray(t, dtype=float)) ** (-mu)

    T = TransformHandle(
        eval_real=ev,
        eval_on_negative_ray=ray,
        eval_complex=lambda z: scale * (lam + z) ** (-mu),
        closed_deriv=lambda s: -mu * scale * (lam + s) ** (-mu - 1.0),
        value_at_zero=1.0 if lam > 0 else DIVERGENT,
        poles=(PoleComponent(lam, scale, mu),),
        origin_exponent=1.0 if lam > 0 else 1.0 - mu,
        ray_breakpoints=(lam,) if lam > 0 else (),
        label="LT " + label,
    )
    return d, T


def gamma_rho_handles(mu: float, lam: float) -> tuple[DensityHandle, TransformHandle]:
    """Levy level of the gamma family: mu e^(-lam x) <-> mu/(lam+s)."""
    d = DensityHandle(
        eval=lambda x: mu * np.exp(-lam * np.asarray(x, dtype=float)),
        normalization="unnormalized",
        origin_exponent=1.0,
        tail_scale=1.0 / lam if lam > 0 else 8.0,
        family=lambda nu: gamma_rho_handles(nu, lam)[0],
        shape=mu,
        label=f"gamma-rho(mu={mu:g},lam={lam:g})",
    )
    T = TransformHandle(
        eval_real=lambda s: mu / (lam + np.asarray(s)),
        eval_on_negative_ray=lambda t: mu / below_axis(
            lam - np.asarray(t, dtype=float)),
        eval_complex=lambda z: mu / (lam + z),
        closed_deriv=lambda s: -mu / (lam + s) ** 2,
        value_at_zero=mu / lam if lam > 0 else DIVERGENT,
        poles=(PoleComponent(lam, mu, 1.0),),
        origin_exponent=1.0 if lam > 0 else 0.0,
        ray_breakpoints=(lam,) if lam > 0 else (),
        label=f"LT gamma-rho(mu={mu:g},lam={lam:g})",
    )
    return d, T


# ---------------------------------------------------------------------------
# positive stable
# ---------------------------------------------------------------------------

def stable_lt(alpha: float, mu: float, s) -> complex | np.ndarray:
    """exp(-mu s^alpha) on the principal branch (works on the negative ray
    when s is given as e^{-i pi} t, i.e. -t with negative-zero imaginary
    part)."""
    s = np.asarray(s)
    return np.exp(-mu * s ** alpha)


def _stable_ray(alpha: float, mu: float, t: np.ndarray) -> np.ndarray:
    w = mu * t ** alpha
    expo = np.minimum(-w * math.cos(math.pi * alpha), 709.0)
    return np.exp(expo) * (
        np.cos(w * math.sin(math.pi * alpha))
        + 1j * np.sin(w * math.sin(math.pi * alpha))
    )


def stable_lt_handle(alpha: float, mu: float) -> TransformHandle:
    spa = math.sin(math.pi * alpha)

    def phase_inv(phi: float) -> float:
        return (phi / (mu * spa)) ** (1.0 / alpha)

    # left tail exp(-c x^(-alpha/(1-alpha))) underflows below x_tail; the
    # oscillatory ray integral is also only panel-resolvable down to x_osc
    c_tail = (1.0 - alpha) * alpha ** (alpha / (1.0 - alpha)) \
        * mu ** (1.0 / (1.0 - alpha))
    x_tail = (c_tail / 720.0) ** ((1.0 - alpha) / alpha)
    x_osc = 745.0 * (mu * spa / (520.0 * math.pi)) ** (1.0 / alpha)
    # for alpha > 1/2 the ray envelope grows like exp(b t^alpha); cap its
    # peak at e^12 so float64 panel sums keep ~1e-10 absolute accuracy
    x_env = 0.0
    b = -mu * math.cos(math.pi * alpha)
    if b > 0:
        x_env = ((1.0 - alpha) * (alpha * b) ** (1.0 / (1.0 - alpha))
                 / (12.0 * alpha)) ** ((1.0 - alpha) / alpha)
    return TransformHandle(
        eval_real=lambda s: np.exp(-mu * np.asarray(s, dtype=float) ** alpha),
        eval_on_negative_ray=lambda t: _stable_ray(
            alpha, mu, np.asarray(t, dtype=float)),
        eval_complex=lambda z: np.exp(-mu * z ** alpha),
        closed_deriv=lambda s: -mu * alpha * s ** (alpha - 1.0)
        * math.exp(-mu * s ** alpha),
        value_at_zero=1.0,
        ray_osc_phase_inv=phase_inv,
        ray_tail_scale=(1.0 / mu) ** (1.0 / alpha),
        inverse_x_floor=max(x_tail, x_osc, x_env),
        label=f"exp(-{mu:g} s^{alpha:g})",
    )


def stable_half_pdf(mu: float, x) -> float | np.ndarray:
    """Closed form for alpha = 1/2: mu/(2 sqrt(pi x^3)) exp(-mu^2/(4x))."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    # log-space keeps the x -> 0 underflow graceful (no inf * 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = (math.log(mu / (2.0 * _SQRT_PI)) - 1.5 * np.log(x_arr)
              - (mu * mu) / (4.0 * x_arr))
        out = np.where(x_arr > 0, np.exp(lg), 0.0)
    return float(out[0]) if np.ndim(x) == 0 else out


def stable_pdf_series(alpha: float, mu: float, x: float,
                      tol_abs: float = 1e-12) -> EvalResult:
    """Series route for the stable density (alternating, extended precision
    when float64 cancellation would exceed the target)."""
    x = float(x)
    lnx, lnmu = math.log(x), math.log(mu) if mu != 1.0 else 0.0

    def term(k: int) -> float:
        s = _sinpi(k * alpha)
        if s == 0.0:
            return 0.0
        ln = (k * lnmu + math.lgamma(k * alpha + 1.0) - math.lgamma(k + 1.0)
              - (k * alpha + 1.0) * lnx + math.log(abs(s)) - math.log(math.pi))
        if ln > 700.0:
            return math.copysign(math.inf, -((-1.0) ** k) * s)
        return -((-1.0) ** k) * math.copysign(math.exp(ln), s)

    def term_mp(k: int):
        a = mp.mpf(alpha)  # lift before scaling by k (precision of k*alpha)
        return (-mp.mpf(-1) ** k * mp.sinpi(a * k) * mp.mpf(mu) ** k
                * mp.gamma(a * k + 1) / mp.factorial(k)
                / mp.mpf(x) ** (a * k + 1) / mp.pi)

    r = sum_series_checked(term, term_mp, tol_abs=tol_abs, k0=1)
    return EvalResult(r.value, r.error, r.terms, "series")


# Float64 digit-loss cap for the series dispatcher: max|term|/|sum| above
# this sends evaluation to the inversion route (the standalone series
# evaluator still reaches any accuracy via its extended-precision fallback).
_SERIES_CANCEL_CAP = 50.0


def stable_pdf_scales(alpha: float, x: float, y,
                      tol: float = 1e-12, kmax: int = 400) -> np.ndarray:
    """f_alpha(x | y) for an array of scales y at fixed x > 0.

    The series terms factor as C_k(x) y^k, so one coefficient sweep serves
    every scale (the workhorse of the mixture quadratures). Scales whose
    float64 cancellation exceeds ~1e3 are recomputed by the scalar
    extended-precision route; scales in the zero left tail are returned as 0.
    """
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if abs(alpha - 0.5) < 1e-12:
        return stable_half_pdf_scale_vec(x, y_arr)
    lnx = math.log(x)
    out = np.zeros_like(y_arr)
    # for scales beyond y_cut the point x sits in the underflowing left
    # tail: the density is numerically zero there (and the series blows up)
    k_tail = ((1.0 - alpha) * alpha ** (alpha / (1.0 - alpha))
              / 720.0) ** ((1.0 - alpha) / alpha)
    y_cut = (x / k_tail) ** alpha
    pos = (y_arr > 0) & (y_arr < y_cut)
    if not np.any(pos):
        return out
    yp = y_arr[pos]
    lny = np.log(yp)
    total = np.zeros_like(yp)
    maxterm = np.zeros_like(yp)
    quiet = np.zeros(yp.shape, dtype=int)
    done = np.zeros(yp.shape, dtype=bool)
    k = 1
    while k <= kmax and not np.all(done):
        s = _sinpi(k * alpha)
        if s != 0.0:
            lnc = (math.lgamma(k * alpha + 1.0) - math.lgamma(k + 1.0)
                   - (k * alpha + 1.0) * lnx + math.log(abs(s))
                   - math.log(math.pi))
            with np.errstate(over="ignore"):
                t = -((-1.0) ** k) * math.copysign(1.0, s) * np.exp(
                    np.minimum(lnc + k * lny, 720.0))
            total = np.where(done, total, total + t)
            at = np.abs(t)
            maxterm = np.maximum(maxterm, np.where(done, 0.0, at))
            small = at <= tol * np.maximum(np.abs(total), 1e-300)
            quiet = np.where(small & ~done, quiet + 1, 0)
            done = done | (quiet >= 3)
        k += 1
    # rescue badly cancelled or unconverged scales with the scalar route
    bad = (~done) | (maxterm > _SERIES_CANCEL_CAP * np.maximum(
        np.abs(total), 1e-300))
    if np.any(bad):
        for i in np.nonzero(bad)[0]:
            total[i] = float(stable_pdf(alpha, float(yp[i]), x))
    out[pos] = np.maximum(total, 0.0)
    return out


def _stable_series_acceptable(alpha: float, mu: float, x: float) -> bool:
    """Float64 applicability: the first 200 terms must pass the
    consecutive-term test at 1e-12 without losing more than ~3 digits to
    cancellation."""
    lnx, lnmu = math.log(x), math.log(mu) if mu != 1.0 else 0.0

    def term(k: int) -> float:
        s = _sinpi(k * alpha)
        if s == 0.0:
            return 0.0
        ln = (k * lnmu + math.lgamma(k * alpha + 1.0) - math.lgamma(k + 1.0)
              - (k * alpha + 1.0) * lnx + math.log(abs(s)) - math.log(math.pi))
        if ln > 700.0:
            raise OverflowError
        return -((-1.0) ** k) * math.copysign(math.exp(ln), s)

    try:
        r = sum_series(term, tol=1e-12, max_terms=200, k0=1)
    except (ConvergenceError, OverflowError):
        return False
    if r.value <= 0:
        return False
    return r.max_term / r.value <= _SERIES_CANCEL_CAP


def stable_pdf(alpha: float, mu: float, x: float,
               method: Optional[str] = None) -> EvalResult:
    """Positive stable density with transform exp(-mu s^alpha).

    Strategy: closed form at alpha = 1/2; otherwise the series where it is
    float64-safe, and inversion along the negative ray elsewhere. ``method``
    forces a route ('closed_form', 'series', 'quadrature').
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"stable index must lie in (0,1), got {alpha}")
    if mu <= 0:
        raise DomainError(f"stable scale must be > 0, got {mu}")
    x = float(x)
    if x <= 0:
        return EvalResult(0.0, 0.0, 1, "closed_form")
    if method is None:
        if abs(alpha - 0.5) < 1e-12:
            method = "closed_form"
        elif _stable_series_acceptable(alpha, mu, x):
            method = "series"
        else:
            method = "quadrature"
    if method == "closed_form":
        if abs(alpha - 0.5) >= 1e-12:
            raise DomainError("closed form only at alpha = 1/2")
        v = stable_half_pdf(mu, x)
        return EvalResult(v, abs(v) * 5e-15, 1, "closed_form")
    if method == "series":
        return stable_pdf_series(alpha, mu, x)
    if method == "quadrature":
        from .transforms import invert_on_negative_ray

        v = invert_on_negative_ray(stable_lt_handle(alpha, mu), x,
                                   warn_negative=False)
        return EvalResult(v, abs(v) * 1e-9 + 1e-13, 1, "quadrature")
    raise DomainError(f"unknown stable_pdf method {method!r}")


def stable_handles(alpha: float, mu: float) -> tuple[DensityHandle, TransformHandle]:
    d = DensityHandle(
        eval=np.vectorize(lambda x: float(stable_pdf(alpha, mu, x)),
                          otypes=[float]),
        origin_exponent=1.0,
        tail_scale=2.0 * mu ** (1.0 / alpha) + 1.0,
        family=lambda nu: stable_handles(alpha, nu)[0],
        shape=mu,
        label=f"stable(a={alpha:g},mu={mu:g})",
    )
    return d, stable_lt_handle(alpha, mu)


def stable_rho_handles(alpha: float, mu: float) -> tuple[DensityHandle, TransformHandle]:
    """Levy level of the stable family:
    mu alpha x^-alpha / Gamma(1-alpha) <-> mu alpha s^(alpha-1)."""
    c = mu * alpha / math.gamma(1.0 - alpha)

    d = DensityHandle(
        eval=lambda x: c * np.asarray(x, dtype=float) ** (-alpha),
        normalization="unnormalized",
        origin_exponent=1.0 - alpha,
        tail_scale=8.0,
        family=lambda nu: gamma_handles(nu, 0.0)[0],
        shape=1.0 - alpha,
        label=f"stable-rho(a={alpha:g},mu={mu:g})",
    )
    T = TransformHandle(
        eval_real=lambda s: mu * alpha * np.asarray(s, dtype=float) ** (alpha - 1.0),
        eval_on_negative_ray=lambda t: mu * alpha * ray_points(t) ** (alpha - 1.0),
        eval_complex=lambda z: mu * alpha * z ** (alpha - 1.0),
        closed_deriv=lambda s: mu * alpha * (alpha - 1.0) * s ** (alpha - 2.0),
        value_at_zero=DIVERGENT,
        poles=(PoleComponent(0.0, mu * alpha, 1.0 - alpha),),
        origin_exponent=alpha,
        label=f"LT stable-rho(a={alpha:g},mu={mu:g})",
    )
    return d, T


def stable_quarter_pdf(mu: float, x: float, tol: float = 1e-12) -> EvalResult:
    """f_{1/4} via the explicit scale-mixture integral
    (mu/(4 pi sqrt(x^3))) Integral y^(-1/2) exp(-mu^2/(4y) - y^2/(4x)) dy."""
    if mu <= 0 or x <= 0:
        raise DomainError("stable_quarter_pdf needs mu > 0, x > 0")
    c = mu / (4.0 * math.pi * x ** 1.5)

    def g(y):
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(
                y > 0,
                y ** (-0.5) * np.exp(-(mu * mu) / (4.0 * np.maximum(y, 1e-300))
                                     - y * y / (4.0 * x)),
                0.0,
            )
        return out

    # integrand peaks between the two exponential cutoffs
    scale = max((mu * mu) ** (1.0 / 1.0) / 4.0, math.sqrt(x), 0.25)
    r = integrate_0_inf(g, tol=tol, scale=scale)
    return EvalResult(c * r.value, c * r.error, r.nevals, "quadrature")


# ---------------------------------------------------------------------------
# convolution of two gamma densities
# ---------------------------------------------------------------------------

def gamma_conv_pdf(mu1: float, lam1: float, mu2: float, lam2: float,
                   x) -> float | np.ndarray:
    """{g_(mu1,lam1) * g_(mu2,lam2)}(x), Kummer closed form.

    The confluent argument is kept nonpositive by pairing the exponential
    factor with the smaller decay; equal decays reduce to gamma closure.
    """
    for nm, v in (("mu1", mu1), ("mu2", mu2)):
        if v <= 0:
            raise DomainError(f"{nm} must be > 0")
    if lam1 < 0 or lam2 < 0:
        raise DomainError("decays must be >= 0")
    if lam1 > lam2:
        mu1, mu2, lam1, lam2 = mu2, mu1, lam2, lam1
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    total = mu1 + mu2
    lead = (mu1 * math.log(lam1) if lam1 > 0 else 0.0) + (
        mu2 * math.log(lam2) if lam2 > 0 else 0.0)
    if lam1 == lam2:
        out = np.exp(lead + (total - 1.0) * np.log(x_arr) - lam1 * x_arr
                     - math.lgamma(total))
    else:
        # e^{-lam1 x} [e^{-dx} M(mu1, total, dx)] with d = lam2-lam1 >= 0:
        # equals e^{-lam1 x} M(mu2, total, -(lam2-lam1) x), overflow-free
        m = np.array([float(kummer_m_scaled(mu1, total, (lam2 - lam1) * xi))
                      for xi in x_arr])
        out = np.exp(lead + (total - 1.0) * np.log(x_arr) - lam1 * x_arr
                     - math.lgamma(total)) * m
    return float(out[0]) if np.ndim(x) == 0 else out


def gamma_conv_bessel(mu: float, lam1: float, lam2: float,
                      x) -> float | np.ndarray:
    """Equal-shape convolution in modified-Bessel form (lam2 > lam1):
    sqrt(pi)/Gamma(mu) e^(-(lam1+lam2)x/2) (x/d)^(mu-1/2) I_(mu-1/2)(dx/2),
    d = lam2-lam1, times the lam^mu normalizers."""
    if lam2 <= lam1:
        raise DomainError("gamma_conv_bessel requires lam2 > lam1")
    d = lam2 - lam1
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    lead = (mu * math.log(lam1) if lam1 > 0 else 0.0) + (
        mu * math.log(lam2) if lam2 > 0 else 0.0)
    iv = np.array([float(bessel_i_scaled(mu - 0.5, 0.5 * d * xi))
                   for xi in x_arr])
    # e^{-(l1+l2)x/2} I(dx/2) = e^{-l1 x} [e^{-dx/2} I(dx/2)] e^{... checks}
    out = (_SQRT_PI / math.gamma(mu) * np.exp(lead - lam1 * x_arr)
           * (x_arr / d) ** (mu - 0.5) * iv)
    return float(out[0]) if np.ndim(x) == 0 else out


def gamma_conv_handles(mu1: float, lam1: float, mu2: float, lam2: float
                       ) -> tuple[DensityHandle, TransformHandle]:
    label = f"gconv({mu1:g},{lam1:g};{mu2:g},{lam2:g})"
    norm = "probability" if (lam1 > 0 and lam2 > 0) else "unnormalized"
    scale = ((lam1 ** mu1 if lam1 > 0 else 1.0)
             * (lam2 ** mu2 if lam2 > 0 else 1.0))

    d = DensityHandle(
        eval=lambda x: gamma_conv_pdf(mu1, lam1, mu2, lam2, np.asarray(x)),
        normalization=norm,
        origin_exponent=mu1 + mu2,
        tail_scale=(mu1 + mu2 + 1.0) / max(min(lam1, lam2), 1e-2),
        family=lambda nu: gamma_conv_handles(
            mu1 * nu / (mu1 + mu2), lam1, mu2 * nu / (mu1 + mu2), lam2)[0],
        shape=mu1 + mu2,
        label=label,
    )

    def ev(s):
        s = np.asarray(s)
        return scale * (lam1 + s) ** (-mu1) * (lam2 + s) ** (-mu2)

    def ray(t):
        t = np.asarray(t, dtype=float)
        return (scale * below_axis(lam1 - t) ** (-mu1)
                * below_axis(lam2 - t) ** (-mu2))

    # the ray cut carries (t - lam_i)^(-mu_i); integrable only for mu_i < 1
    ray_ok = max(mu1, mu2) < 1.0

    T = TransformHandle(
        eval_real=ev,
        eval_on_negative_ray=ray if ray_ok else None,
        eval_complex=lambda z: scale * (lam1 + z) ** (-mu1) * (lam2 + z) ** (-mu2),
        closed_deriv=lambda s: -(mu1 / (lam1 + s) + mu2 / (lam2 + s))
        * scale * (lam1 + s) ** (-mu1) * (lam2 + s) ** (-mu2),
        value_at_zero=1.0 if norm == "probability" else DIVERGENT,
        origin_exponent=1.0 if lam1 > 0 else 1.0 - mu1,
        ray_breakpoints=tuple(b for b in (lam1, lam2) if b > 0),
        inverse_x_floor=1e-14,
        label="LT " + label,
    )
    return d, T


# ---------------------------------------------------------------------------
# extended beta
# ---------------------------------------------------------------------------

def extended_beta_pdf(a: float, b: float, t) -> float | np.ndarray:
    """Beta(a,b) density extended by zero to the whole half-line."""
    if a <= 0 or b <= 0:
        raise DomainError("beta shapes must be > 0")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    c = math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b))
    with np.errstate(divide="ignore", invalid="ignore"):
        inside = c * t_arr ** (a - 1.0) * (1.0 - t_arr) ** (b - 1.0)
    out = np.where((t_arr > 0) & (t_arr < 1), inside, 0.0)
    out = np.where((t_arr == 0) & (a < 1), np.inf, out)
    out = np.where((t_arr == 1) & (b < 1), np.inf, out)
    return float(out[0]) if np.ndim(t) == 0 else out


def extended_beta_lt(a: float, b: float, x: float) -> EvalResult:
    """Laplace transform of the extended beta: M(a, a+b, -x)."""
    return kummer_m(a, a + b, -float(x))


def extended_beta_handles(a: float, b: float) -> tuple[DensityHandle, TransformHandle]:
    d = DensityHandle(
        eval=lambda t: extended_beta_pdf(a, b, np.asarray(t)),
        support=(0.0, 1.0),
        origin_exponent=a,
        label=f"beta({a:g},{b:g})",
    )
    T = TransformHandle(
        eval_real=np.vectorize(lambda s: float(kummer_m(a, a + b, -s)),
                               otypes=[float]),
        # entire transform: no cut on the ray, so no ray evaluator
        value_at_zero=1.0,
        label=f"LT beta({a:g},{b:g})",
    )
    return d, T


# ---------------------------------------------------------------------------
# first passage (Bessel) family
# ---------------------------------------------------------------------------

def first_passage_pdf(mu: float, x) -> float | np.ndarray:
    """(mu/x) e^(-x/2) I_mu(x/2) via the scaled Bessel kernel."""
    if mu <= 0:
        raise DomainError("first_passage shape must be > 0")
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([
        mu / xi * float(bessel_i_scaled(mu, 0.5 * xi)) if xi > 0 else 0.0
        for xi in x_arr
    ])
    return float(out[0]) if np.ndim(x) == 0 else out


def first_passage_lt(mu: float, s) -> float | np.ndarray:
    s = np.asarray(s, dtype=float)
    return (np.sqrt(1.0 + s) - np.sqrt(s)) ** (2.0 * mu)


def first_passage_handles(mu: float) -> tuple[DensityHandle, TransformHandle]:
    d = DensityHandle(
        eval=lambda x: first_passage_pdf(mu, np.asarray(x)),
        origin_exponent=mu,
        tail_scale=2.0 * mu + 8.0,  # subexponential x^{-3/2} e^{-x/2}-ish tail
        family=lambda nu: first_passage_handles(nu)[0],
        shape=mu,
        label=f"first_passage(mu={mu:g})",
    )

    def ray(t):
        t = np.asarray(t, dtype=float)
        w1 = np.sqrt(below_axis(1.0 - t))
        w2 = np.sqrt(below_axis(-t))
        return (w1 - w2) ** (2.0 * mu)

    T = TransformHandle(
        eval_real=lambda s: first_passage_lt(mu, s),
        eval_on_negative_ray=ray,
        eval_complex=lambda z: (np.sqrt(1.0 + z) - np.sqrt(z)) ** (2.0 * mu),
        closed_deriv=lambda s: -mu * first_passage_lt(mu, s)
        / math.sqrt(s * (1.0 + s)),
        value_at_zero=1.0,
        origin_exponent=1.0,
        ray_breakpoints=(1.0,),
        inverse_x_floor=1e-14,
        label=f"(sqrt(1+s)-sqrt(s))^(2mu), mu={mu:g}",
    )
    return d, T


def bessel_rho_handles(mu: float) -> tuple[DensityHandle, TransformHandle]:
    """Levy level of the first-passage family:
    mu e^(-x/2) I_0(x/2) <-> mu/sqrt(s(1+s))."""
    d = DensityHandle(
        eval=lambda x: mu * np.array(
            [float(bessel_i_scaled(0.0, 0.5 * xi)) for xi in np.atleast_1d(x)]),
        normalization="unnormalized",
        origin_exponent=1.0,
        tail_scale=16.0,
        family=lambda nu: _bessel_rho_family(nu),
        shape=0.5,
        label=f"bessel-rho(mu={mu:g})",
    )

    def ray(t):
        t = np.asarray(t, dtype=float)
        return mu / np.sqrt(below_axis(t * t - t))

    T = TransformHandle(
        eval_real=lambda s: mu / np.sqrt(np.asarray(s) * (1.0 + np.asarray(s))),
        eval_on_negative_ray=ray,
        eval_complex=lambda z: mu / np.sqrt(z * (1.0 + z)),
        closed_deriv=lambda s: -mu * (0.5 / s + 0.5 / (1.0 + s))
        / math.sqrt(s * (1.0 + s)),
        value_at_zero=DIVERGENT,
        origin_exponent=0.5,
        ray_breakpoints=(1.0,),
        label=f"mu/sqrt(s(1+s)), mu={mu:g}",
    )
    return d, T


def _bessel_rho_family(nu: float) -> DensityHandle:
    """Shape family behind the Bessel Levy node: the (0,1)-decay equal-shape
    gamma convolution with transform (s(1+s))^-nu."""
    return gamma_conv_handles(nu, 0.0, nu, 1.0)[0]


# ---------------------------------------------------------------------------
# fractional gamma (positive Linnik)
# ---------------------------------------------------------------------------

def frac_gamma_lt(alpha: float, lam: float, mu: float, s) -> np.ndarray:
    s = np.asarray(s)
    return lam ** mu * (lam + s ** alpha) ** (-mu)


def frac_gamma_half_pdf(lam: float, mu: float, x) -> float | np.ndarray:
    """alpha = 1/2 closed form through the (scaled) parabolic cylinder
    function: sqrt(2/pi) mu lam^mu (2x)^(mu/2-1) e^(lam^2 x/2)
    D_(-mu-1)(lam sqrt(2x)); the exponential cancels exactly against the
    scaling of D."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    z = lam * np.sqrt(2.0 * x_arr)
    dbar = np.atleast_1d(parabolic_cylinder_d_scaled(-mu - 1.0, z))
    with np.errstate(divide="ignore"):
        out = (math.sqrt(2.0 / math.pi) * mu * lam ** mu
               * (2.0 * x_arr) ** (0.5 * mu - 1.0) * np.asarray(dbar, dtype=float))
    return float(out[0]) if np.ndim(x) == 0 else out


def frac_gamma_ml_pdf(alpha: float, lam: float, x: float) -> EvalResult:
    """mu = 1 route: alpha lam x^(alpha-1) E'_alpha(-lam x^alpha)."""
    x = float(x)
    d = mittag_leffler_deriv(alpha, -lam * x ** alpha)
    v = alpha * lam * x ** (alpha - 1.0) * float(d)
    return EvalResult(v, abs(v) * 1e-11 + d.abs_error_estimate,
                      d.terms_or_nodes_used, d.method)


def frac_gamma_mixture_pdf(alpha: float, lam: float, mu: float, x: float,
                           tol: float = 1e-11) -> EvalResult:
    """Scale-mixture route: Integral f_alpha(x|y) g_(mu,lam)(y) dy."""
    x = float(x)

    def g(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return stable_pdf_scales(alpha, x, y) * gamma_pdf(mu, lam, y)

    scale = max(min(x ** alpha, (mu + 1.0) / lam), 1e-3)
    r = integrate_0_inf(g, tol=tol, scale=scale)
    return EvalResult(r.value, r.error, r.nevals, "quadrature")


def stable_half_pdf_scale_vec(x: float, y) -> np.ndarray:
    """f_(1/2)(x | y) as a function of the scale y (vectorized)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return y / (2.0 * _SQRT_PI * x ** 1.5) * np.exp(-y * y / (4.0 * x))


def frac_gamma_pdf(alpha: float, lam: float, mu: float, x: float,
                   strategy: Optional[str] = None,
                   cross_check: bool = False,
                   check_tol: float = 1e-6) -> EvalResult:
    """Fractional gamma density m_(alpha,lam)(x | mu).

    Strategies: 'ml' (mu = 1, Mittag-Leffler derivative), 'pc' (alpha = 1/2,
    parabolic cylinder), 'mixture' (general). With ``cross_check`` every
    applicable strategy is computed and a disagreement beyond ``check_tol``
    raises :class:`StrategyDisagreementError` (never silently averaged).
    """
    if lam <= 0 or mu <= 0:
        raise DomainError("frac_gamma requires lam > 0 and mu > 0")
    if not (0.0 < alpha <= 1.0):
        raise DomainError("frac_gamma requires 0 < alpha <= 1")
    x = float(x)
    if alpha == 1.0:
        return EvalResult(gamma_pdf(mu, lam, x), 1e-15, 1, "closed_form")

    applicable: dict[str, EvalResult] = {}
    is_half = abs(alpha - 0.5) < 1e-12
    if strategy is None:
        strategy = "pc" if is_half else ("ml" if mu == 1.0 else "mixture")
    routes = [strategy]
    if cross_check:
        routes = (["pc"] if is_half else []) + (["ml"] if mu == 1.0 else [])
        routes.append("mixture")

    for rt in routes:
        if rt == "pc":
            if not is_half:
                raise DomainError("pc strategy needs alpha = 1/2")
            v = frac_gamma_half_pdf(lam, mu, x)
            applicable[rt] = EvalResult(v, abs(v) * 1e-10, 1, "closed_form")
        elif rt == "ml":
            if mu != 1.0:
                raise DomainError("ml strategy needs mu = 1")
            applicable[rt] = frac_gamma_ml_pdf(alpha, lam, x)
        elif rt == "mixture":
            applicable[rt] = frac_gamma_mixture_pdf(alpha, lam, mu, x)
        else:
            raise DomainError(f"unknown frac_gamma strategy {rt!r}")

    if cross_check and len(applicable) > 1:
        vals = {k: float(v) for k, v in applicable.items()}
        lo, hi = min(vals.values()), max(vals.values())
        if hi - lo > check_tol * max(1.0, abs(hi)):
            raise StrategyDisagreementError(
                f"frac_gamma strategies disagree at x={x}: {vals}", vals)
    return applicable[routes[0] if not cross_check else strategy]


def frac_gamma_r(alpha: float, lam: float, x: float) -> EvalResult:
    """r_(alpha,lam)(x) = alpha E_alpha(-lam x^alpha); the closed erfc form
    appears at alpha = 1/2 and the reciprocal-power tail is the asymptotic
    branch of E."""
    if lam <= 0:
        raise DomainError("frac_gamma_r requires lam > 0")
    if not (0.0 < alpha < 1.0):
        raise DomainError("frac_gamma_r requires 0 < alpha < 1")
    x = float(x)
    if x == 0.0:
        return EvalResult(alpha, 0.0, 1, "closed_form")
    if abs(alpha - 0.5) < 1e-12:
        v = 0.5 * float(erfcx(lam * math.sqrt(x)))
        return EvalResult(v, abs(v) * 1e-13, 1, "closed_form")
    e = mittag_leffler(alpha, -lam * x ** alpha)
    return EvalResult(alpha * float(e), alpha * e.abs_error_estimate,
                      e.terms_or_nodes_used, e.method)


def frac_gamma_r_mixture(alpha: float, lam: float, x: float,
                         tol: float = 1e-10) -> float:
    """Independent mixture route for r: x Integral f_alpha(x|y) e^(-lam y)/y dy."""
    x = float(x)

    def g(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return np.where(
            y > 0,
            stable_pdf_scales(alpha, x, y) / np.maximum(y, 1e-300)
            * np.exp(-lam * y), 0.0)

    r = integrate_0_inf(g, tol=tol, scale=max(min(x ** alpha, 1.0 / lam), 1e-3))
    return x * r.value


def frac_gamma_quarter_pdf(lam: float, mu: float, x: float,
                           tol: float = 1e-11) -> EvalResult:
    """m_(1/4,lam)(x | mu) by composing the alpha = 1/2 kernels:
    (1/(2 sqrt(pi x^3))) Integral z e^(-z^2/4x) m_(1/2,lam)(z | mu) dz."""
    x = float(x)
    if x <= 0 or lam <= 0 or mu <= 0:
        raise DomainError("frac_gamma_quarter_pdf needs x, lam, mu > 0")

    def g(z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        inner = np.asarray(frac_gamma_half_pdf(lam, mu, z), dtype=float)
        return z * np.exp(-z * z / (4.0 * x)) * inner

    r = integrate_0_inf(g, tol=tol, scale=max(math.sqrt(x), 0.25))
    lnc = -math.log(2.0 * _SQRT_PI) - 1.5 * math.log(x)
    val = math.exp(lnc + math.log(r.value)) if r.value > 0 else 0.0
    err = math.exp(lnc + math.log(max(r.error, 1e-300)))
    return EvalResult(val, err, r.nevals, "quadrature")


def frac_gamma_quarter_r(lam: float, x: float, tol: float = 1e-11) -> EvalResult:
    """r_(1/4,lam)(x) from the alpha = 1/2 closed form:
    (1/(4 sqrt(pi x))) Integral e^(-z^2/4x) e^(lam^2 z) erfc(lam sqrt(z)) dz."""
    x = float(x)
    if x <= 0 or lam <= 0:
        raise DomainError("frac_gamma_quarter_r needs x, lam > 0")

    def g(z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return np.exp(-z * z / (4.0 * x)) * erfcx_array(lam * np.sqrt(z))

    r = integrate_0_inf(g, tol=tol, scale=max(math.sqrt(x), 0.25))
    c = 1.0 / (4.0 * _SQRT_PI * math.sqrt(x))
    return EvalResult(c * r.value, c * r.error, r.nevals, "quadrature")


def frac_gamma_thorin(alpha: float, lam: float, mu: float, t) -> float | np.ndarray:
    """Thorin density of the fractional gamma family:
    (mu alpha/pi) lam t^(alpha-1) sin(pi alpha)
    / (lam^2 + 2 lam t^alpha cos(pi alpha) + t^(2 alpha))."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    spa, cpa = math.sin(math.pi * alpha), math.cos(math.pi * alpha)
    ta = t_arr ** alpha
    with np.errstate(divide="ignore"):
        out = (mu * alpha / math.pi * lam * t_arr ** (alpha - 1.0) * spa
               / (lam * lam + 2.0 * lam * ta * cpa + ta * ta))
    return float(out[0]) if np.ndim(t) == 0 else out


def frac_gamma_handles(alpha: float, lam: float, mu: float
                       ) -> tuple[DensityHandle, TransformHandle]:
    label = f"frac_gamma(a={alpha:g},lam={lam:g},mu={mu:g})"
    if abs(alpha - 0.5) < 1e-12:
        def d_eval(x):
            return np.asarray(frac_gamma_half_pdf(lam, mu, np.asarray(x)),
                              dtype=float)
    else:
        d_eval = np.vectorize(
            lambda x: float(frac_gamma_pdf(alpha, lam, mu, x)), otypes=[float])
    d = DensityHandle(
        eval=d_eval,
        origin_exponent=alpha * mu,
        tail_scale=4.0 * (mu / lam) ** (1.0 / alpha) + 4.0,
        family=lambda nu: frac_gamma_inversion_density(alpha, lam, nu),
        shape=mu,
        label=label,
    )

    def ray(t):
        t = np.asarray(t, dtype=float)
        base = lam + np.exp(-1j * math.pi * alpha) * t ** alpha
        return lam ** mu * base ** (-mu)

    T = TransformHandle(
        eval_real=lambda s: frac_gamma_lt(alpha, lam, mu, s),
        eval_on_negative_ray=ray,
        eval_complex=lambda z: lam ** mu * (lam + z ** alpha) ** (-mu),
        closed_deriv=lambda s: -mu * alpha * s ** (alpha - 1.0) * lam ** mu
        * (lam + s ** alpha) ** (-mu - 1.0),
        value_at_zero=1.0,
        origin_exponent=1.0,
        ray_tail_scale=(lam) ** (-1.0 / alpha),
        inverse_x_floor=1e-14,
        label="LT " + label,
    )
    return d, T


def frac_gamma_inversion_density(alpha: float, lam: float,
                                 nu: float) -> DensityHandle:
    """Inversion-backed fractional gamma density (vectorized over x); used
    as the shape-family hook so Richardson descent stays array-fast."""
    from .transforms import invert_handle

    h = invert_handle(frac_gamma_handles_lt_only(alpha, lam, nu))
    h.normalization = "probability"
    h.label = f"frac_gamma-inv(a={alpha:g},lam={lam:g},mu={nu:g})"
    return h


def frac_gamma_handles_lt_only(alpha: float, lam: float,
                               mu: float) -> TransformHandle:
    return frac_gamma_handles(alpha, lam, mu)[1]


def mixed_power_frac_transform(alpha: float, lam: float,
                               nu: float) -> TransformHandle:
    """LT of the convolution {g_(nu(1-alpha),0) * m_(alpha,lam)(.|nu)}:
    s^(-nu(1-alpha)) lam^nu (lam+s^alpha)^(-nu); the shape family behind the
    convolution-centred Levy node."""
    p = nu * (1.0 - alpha)

    def ev(s):
        s = np.asarray(s, dtype=float)
        return s ** (-p) * lam ** nu * (lam + s ** alpha) ** (-nu)

    def ray(t):
        t = np.asarray(t, dtype=float)
        sp = ray_points(t)
        return (sp ** (-p) * lam ** nu
                * (lam + np.exp(-1j * math.pi * alpha) * t ** alpha) ** (-nu))

    return TransformHandle(
        eval_real=ev, eval_on_negative_ray=ray,
        eval_complex=lambda z: z ** (-p) * lam ** nu * (lam + z ** alpha) ** (-nu),
        value_at_zero=DIVERGENT,
        poles=(PoleComponent(0.0, 1.0, p),),
        origin_exponent=1.0 - p,
        inverse_x_floor=1e-14,
        label=f"s^-{p:g} (lam/(lam+s^a))^{nu:g}",
    )


def frac_gamma_rho_handles(alpha: float, lam: float, mu: float
                           ) -> tuple[DensityHandle, TransformHandle]:
    """Levy level of the fractional gamma family:
    mu r_(alpha,lam)(x) <-> mu alpha s^(alpha-1)/(lam + s^alpha)."""
    d = DensityHandle(
        eval=np.vectorize(lambda x: mu * float(frac_gamma_r(alpha, lam, x)),
                          otypes=[float]),
        normalization="unnormalized",
        origin_exponent=1.0,
        tail_scale=4.0 / lam ** (1.0 / alpha) + 4.0,
        family=lambda nu: frac_gamma_rho_family(alpha, lam, nu),
        shape=mu,
        label=f"frac_gamma-rho(a={alpha:g},lam={lam:g},mu={mu:g})",
    )

    def ray(t):
        t = np.asarray(t, dtype=float)
        s = ray_points(t)
        return (mu * alpha * s ** (alpha - 1.0)
                / (lam + np.exp(-1j * math.pi * alpha) * t ** alpha))

    T = TransformHandle(
        eval_real=lambda s: mu * alpha * np.asarray(s) ** (alpha - 1.0)
        / (lam + np.asarray(s) ** alpha),
        eval_on_negative_ray=ray,
        eval_complex=lambda z: mu * alpha * z ** (alpha - 1.0)
        / (lam + z ** alpha),
        value_at_zero=DIVERGENT,
        origin_exponent=alpha,
        label=f"mu a s^(a-1)/(lam+s^a), a={alpha:g}",
    )
    return d, T


def frac_gamma_rho_family(alpha: float, lam: float, nu: float) -> DensityHandle:
    """Shape family behind the fractional-gamma Levy node (descent hook)."""
    return frac_gamma_rho_handles(alpha, lam, nu)[0]


# ---------------------------------------------------------------------------
# tilted h family
# ---------------------------------------------------------------------------

def h_rho_handles(alpha: float, theta: float, mu: float, variant: int
                  ) -> tuple[DensityHandle, TransformHandle]:
    """Levy level of the h family.

    Variant 1: rho~(s) = s^(alpha-1)/(1+s)^(alpha-theta), whose density is
    the convolution {g_(1-alpha,0) * g_(alpha-theta,1)}. Variant 2 swaps the
    decays: rho~(s) = (1+s)^(alpha-1)/s^(alpha-theta), density
    {g_(1-alpha,1) * g_(alpha-theta,0)}.
    """
    if not (0.0 <= theta < alpha < 1.0):
        raise DomainError("h family requires 0 <= theta < alpha < 1")
    if variant not in (1, 2):
        raise DomainError("variant must be 1 or 2")
    if variant == 1:
        pairs = ((1.0 - alpha, 0.0), (alpha - theta, 1.0))
        origin = alpha
    else:
        pairs = ((1.0 - alpha, 1.0), (alpha - theta, 0.0))
        origin = 1.0 - alpha + theta
    (m1, l1), (m2, l2) = pairs

    base = gamma_conv_handles(m1, l1, m2, l2)[0]
    d = DensityHandle(
        eval=lambda x: mu * base.eval(np.asarray(x)),
        normalization="unnormalized",
        origin_exponent=1.0 - theta,
        tail_scale=8.0,
        # level shape is the total of the two component shapes, 1 - theta;
        # the mu prefactor is the constant the descent forgets
        family=lambda nu: _h_rho_scaled(alpha, theta, variant, nu),
        shape=1.0 - theta,
        label=f"h-rho(v{variant},a={alpha:g},th={theta:g},mu={mu:g})",
    )

    def ev(s):
        s = np.asarray(s, dtype=float)
        if variant == 1:
            return mu * s ** (alpha - 1.0) * (1.0 + s) ** (theta - alpha)
        return mu * (1.0 + s) ** (alpha - 1.0) * s ** (theta - alpha)

    def ray(t):
        t = np.asarray(t, dtype=float)
        s_pow = ray_points(t)
        one_plus = below_axis(1.0 - t)
        if variant == 1:
            return mu * s_pow ** (alpha - 1.0) * one_plus ** (theta - alpha)
        return mu * one_plus ** (alpha - 1.0) * s_pow ** (theta - alpha)

    def evc(z):
        if variant == 1:
            return mu * z ** (alpha - 1.0) * (1.0 + z) ** (theta - alpha)
        return mu * (1.0 + z) ** (alpha - 1.0) * z ** (theta - alpha)

    T = TransformHandle(
        eval_real=ev,
        eval_on_negative_ray=ray,
        eval_complex=evc,
        value_at_zero=DIVERGENT,
        origin_exponent=origin,
        ray_breakpoints=(1.0,),
        label=f"h-rho~(v{variant},a={alpha:g},th={theta:g})",
    )
    return d, T


def _h_rho_scaled(alpha, theta, variant, nu) -> DensityHandle:
    # descent family: the same convolution with both shapes scaled by nu/(1-theta)
    f = nu / (1.0 - theta)
    if variant == 1:
        return gamma_conv_handles(f * (1.0 - alpha), 0.0,
                                  f * (alpha - theta), 1.0)[0]
    return gamma_conv_handles(f * (1.0 - alpha), 1.0,
                              f * (alpha - theta), 0.0)[0]


def h_family_lt(alpha: float, theta: float, mu: float, s: float,
                variant: int = 1, tol: float = 1e-12) -> float:
    """exp(-mu Integral_0^s rho_(alpha,theta)) -- the three-parameter ID
    transform; its density is reachable only by numerical inversion."""
    from .transforms import levy_exponent

    _, rho_T = h_rho_handles(alpha, theta, 1.0, variant)
    return math.exp(-mu * levy_exponent(rho_T, s, tol=tol))


def h_family_handles(alpha: float, theta: float, mu: float, variant: int = 1
                     ) -> tuple[DensityHandle, TransformHandle]:
    from .transforms import exponent_ascent_handle, invert_handle

    _, rho_T = h_rho_handles(alpha, theta, mu, variant)
    T = exponent_ascent_handle(rho_T)
    T.label = f"h~(v{variant},a={alpha:g},th={theta:g},mu={mu:g})"
    d = invert_handle(T)
    d.nonneg = True
    d.normalization = "probability"
    d.family = lambda nu: h_family_handles(alpha, theta, nu, variant)[0]
    d.shape = mu
    d.label = f"h(v{variant},a={alpha:g},th={theta:g},mu={mu:g})"
    return d, T


def h_family_thorin(alpha: float, theta: float, mu: float, t,
                    variant: int = 1, tol: float = 1e-11) -> float | np.ndarray:
    """Thorin density of the h family: mu (sin(pi theta)/pi)
    {t^(theta-1) * beta}(t), with the beta factor depending on the variant;
    theta = 0 degenerates to the pure beta node."""
    if not (0.0 <= theta < alpha < 1.0):
        raise DomainError("h family requires 0 <= theta < alpha < 1")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if variant == 1:
        a_b = (alpha - theta, 1.0 - alpha)
    elif variant == 2:
        a_b = (1.0 - alpha, alpha - theta)
    else:
        raise DomainError("variant must be 1 or 2")
    if theta == 0.0:
        out = mu * extended_beta_pdf(*a_b, t_arr)
        return float(out[0]) if np.ndim(t) == 0 else out

    a, b = a_b
    cbeta = math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b))
    spt = math.sin(math.pi * theta) / math.pi

    # {u^(th-1) * beta}(t) = Integral_0^min(1,t) (t-u)^(th-1) beta_(a,b)(u) du;
    # the integrand is singular at u = 0 (beta), at u = t when t < 1 (kernel)
    # and at u = 1 when t > 1 (beta). At t = 1 exactly the two collide into
    # an integrable +inf spike of the convolution: return the inf marker.
    out = np.empty_like(t_arr)
    for i, ti in enumerate(t_arr):
        if abs(ti - 1.0) < 1e-12:
            out[i] = np.inf
            continue
        if ti < 1.0:
            def f_pq(p, q, w, ti=ti):
                u, rest = w * p, w * q          # u from 0; t - u from t
                return cbeta * u ** (a - 1.0) * (1.0 - u) ** (b - 1.0) \
                    * rest ** (theta - 1.0)

            r = tanh_sinh(None, 0.0, ti, tol=tol, f_pq=f_pq)
        else:
            def f_pq(p, q, w, ti=ti):
                u, one_minus_u = w * p, w * q   # u from 0; 1 - u from 1
                return cbeta * u ** (a - 1.0) * one_minus_u ** (b - 1.0) \
                    * (ti - 1.0 + one_minus_u) ** (theta - 1.0)

            r = tanh_sinh(None, 0.0, 1.0, tol=tol, f_pq=f_pq)
        out[i] = mu * spt * r.value
    return float(out[0]) if np.ndim(t) == 0 else out


# ---------------------------------------------------------------------------
# stable mixtures
# ---------------------------------------------------------------------------

def stable_mixture_pdf(mixing: DensityHandle, alpha: float, x: float,
                       tol: float = 1e-10) -> EvalResult:
    """Integral f_alpha(x|y) mixing(y) dy (+ exact atom terms).

    The transform of the result is the mixing transform evaluated at
    s^alpha.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError("stable index must lie in (0,1)")
    x = float(x)
    total = sum(a.mass * float(stable_pdf(alpha, a.location, x))
                for a in mixing.atoms if a.location > 0)

    def g(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return stable_pdf_scales(alpha, x, y) * mixing.eval(y)

    lo, hi = mixing.support
    if math.isfinite(hi):
        r = tanh_sinh(g, lo, hi, tol=tol)
    else:
        r = integrate_0_inf(g, tol=tol,
                            scale=max(min(x ** alpha, mixing.tail_scale), 1e-3))
    return EvalResult(total + r.value, r.error, r.nevals, "quadrature")
