"""Shared numerical kernels: tanh-sinh quadrature, panel drivers for
semi-infinite integrals, and cancellation-aware series summation.

All integrators accept vectorized integrands (``f(x: ndarray) -> ndarray``).
Endpoint singularities that are integrable (``x**(g-1)`` with ``g > 0``) are
handled by the double-exponential node clustering; integrands that need the
*distance* to an endpoint to stay accurate can use the ``f_pq`` form, which
receives relative distances from both endpoints instead of absolute
coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import mpmath as mp
import numpy as np

from .errors import ConvergenceError, QuadratureError

_EPS = np.finfo(float).eps

# ---------------------------------------------------------------------------
# tanh-sinh nodes
# ---------------------------------------------------------------------------

# u = (pi/2)*sinh(t) is capped so that the distance-to-endpoint factors
# q = 2/(exp(2u)+1) stay normal floats; weights there are ~exp(-2u) ~ 0
# anyway, so nothing is lost at double precision.
_U_CAP = 285.0
_T_MAX = math.asinh(2.0 * _U_CAP / math.pi)

_node_cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _ts_nodes(level: int):
    """New tanh-sinh nodes introduced at refinement ``level``.

    Returns ``(p, q, w)`` where ``p = (1+x)/2`` and ``q = (1-x)/2`` are the
    relative distances from the left/right endpoints (computed without
    cancellation) and ``w`` the weights for mesh ``h = 2**-level`` on [-1, 1].
    Level 0 holds all integer nodes; higher levels hold odd multiples only.
    """
    cached = _node_cache.get(level)
    if cached is not None:
        return cached
    h = 2.0 ** (-level)
    if level == 0:
        j = np.arange(-int(_T_MAX / h), int(_T_MAX / h) + 1)
        t = j * h
    else:
        jmax = int(_T_MAX / h)
        j = np.arange(1, jmax + 1, 2)
        t = np.concatenate([-j[::-1] * h, j * h])
    u = 0.5 * math.pi * np.sinh(t)
    keep = np.abs(u) <= _U_CAP
    t, u = t[keep], u[keep]
    # (1 -+ tanh(u))/2 computed without cancellation at either end
    q = 1.0 / (1.0 + np.exp(2.0 * u))       # (1 - tanh(u)) / 2
    p = 1.0 / (1.0 + np.exp(-2.0 * u))      # (1 + tanh(u)) / 2
    w = 0.5 * math.pi * np.cosh(t) / np.cosh(u) ** 2
    _node_cache[level] = (p, q, w)
    return p, q, w


@dataclass
class QuadResult:
    value: float
    error: float
    nevals: int

    def __float__(self):
        return self.value


def tanh_sinh(
    f: Callable[[np.ndarray], np.ndarray] | None,
    a: float,
    b: float,
    tol: float = 1e-12,
    max_level: int = 11,
    f_pq: Callable[[np.ndarray, np.ndarray, float], np.ndarray] | None = None,
) -> QuadResult:
    """Adaptive tanh-sinh integration of ``f`` over the finite interval [a, b].

    Either ``f(x)`` or ``f_pq(p, q, width)`` must be given; the latter is
    evaluated with ``x = a + width*p = b - width*q`` and should be used when
    the integrand needs exact distances to a singular endpoint.

    The tolerance is applied mixed absolute/relative: convergence is declared
    when successive refinements differ by less than ``tol * max(1, |I|)``.
    """
    if b == a:
        return QuadResult(0.0, 0.0, 0)
    if b < a:
        r = tanh_sinh(f, b, a, tol, max_level, f_pq)
        return QuadResult(-r.value, r.error, r.nevals)
    width = b - a
    half = 0.5 * width

    def _eval(p, q):
        if f_pq is not None:
            y = f_pq(p, q, width)
        else:
            y = f(a + width * p)
        y = np.asarray(y, dtype=float)
        return np.where(np.isfinite(y), y, 0.0)

    nevals = 0
    total = 0.0
    prev = math.inf
    err = math.inf
    for level in range(max_level + 1):
        p, q, w = _ts_nodes(level)
        contrib = float(np.dot(w, _eval(p, q)))
        nevals += p.size
        h = 2.0 ** (-level)
        total = (0.5 * total + h * contrib * half) if level > 0 else contrib * half
        if level >= 2:
            err = abs(total - prev)
            if err <= tol * max(1.0, abs(total)):
                # superlinear convergence: the last difference is a safe bound
                return QuadResult(total, err, nevals)
        prev = total
    return QuadResult(total, err, nevals)


def integrate_0_inf(
    f: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-11,
    scale: float = 1.0,
    breakpoints: Sequence[float] = (),
    max_doublings: int = 64,
    tail_consecutive: int = 3,
) -> QuadResult:
    """Integrate ``f`` over (0, inf) by tanh-sinh panels.

    The first panels cover (0, scale] and any supplied breakpoints; after
    that, panel width doubles until ``tail_consecutive`` consecutive panels
    contribute below tolerance. Integrable singularities at 0 and at the
    breakpoints are absorbed by the panel endpoints.
    """
    if scale <= 0:
        scale = 1.0
    pts = sorted({float(x) for x in breakpoints if 0.0 < x < math.inf})
    edges = [0.0]
    for x in pts:
        edges.append(x)
    if not pts or pts[-1] < scale:
        edges.append(max(scale, edges[-1] * 2 or scale))
    total = 0.0
    err = 0.0
    nevals = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = tanh_sinh(f, lo, hi, tol=tol)
        total += r.value
        err += r.error
        nevals += r.nevals
    lo = edges[-1]
    widthp = max(scale, lo if lo > 0 else scale)
    quiet = 0
    for _ in range(max_doublings):
        hi = lo + widthp
        r = tanh_sinh(f, lo, hi, tol=tol)
        total += r.value
        err += r.error
        nevals += r.nevals
        if abs(r.value) <= tol * max(1.0, abs(total)):
            quiet += 1
            if quiet >= tail_consecutive:
                return QuadResult(total, err, nevals)
        else:
            quiet = 0
        lo = hi
        widthp *= 2.0
    raise QuadratureError(
        f"semi-infinite integral did not settle after {max_doublings} panels "
        f"(last panel {r.value!r}, total {total!r})"
    )


def integrate_panels(
    f: Callable[[np.ndarray], np.ndarray],
    edges: Sequence[float],
    tol: float = 1e-12,
) -> QuadResult:
    """Sum tanh-sinh integrals over consecutive [edges[i], edges[i+1]]."""
    total = 0.0
    err = 0.0
    nevals = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = tanh_sinh(f, lo, hi, tol=tol)
        total += r.value
        err += r.error
        nevals += r.nevals
    return QuadResult(total, err, nevals)


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(n: int = 32):
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (x, w)
    return _GL_CACHE[n]


def segment_integral_complex(g, z0: complex, z1: complex, n: int = 32) -> complex:
    """Fixed-order Gauss-Legendre integral of ``g`` along the straight segment
    from ``z0`` to ``z1`` in the complex plane."""
    x, w = gauss_legendre(n)
    mid = 0.5 * (z0 + z1)
    half = 0.5 * (z1 - z0)
    z = mid + half * x
    return half * np.sum(w * g(z))


# ---------------------------------------------------------------------------
# series summation
# ---------------------------------------------------------------------------

@dataclass
class SeriesResult:
    value: float
    error: float
    terms: int
    max_term: float
    used_mp: bool = False

    def __float__(self):
        return self.value


def sum_series(
    term: Callable[[int], float],
    tol: float = 5e-14,
    max_terms: int = 10000,
    consecutive: int = 3,
    k0: int = 0,
) -> SeriesResult:
    """Sum ``term(k)`` for ``k >= k0`` until ``consecutive`` successive terms
    fall below ``tol * |partial sum|`` (hard cap ``max_terms``).

    Raises :class:`ConvergenceError` if the cap is reached. The returned
    ``max_term`` lets callers estimate cancellation-induced error:
    roughly ``max_term * eps``.
    """
    total = 0.0
    max_term = 0.0
    quiet = 0
    k = k0
    while k < k0 + max_terms:
        t = term(k)
        if not math.isfinite(t):
            raise ConvergenceError(
                f"series term {k} is not finite", {"partial": total}
            )
        total += t
        at = abs(t)
        if at > max_term:
            max_term = at
        if at <= tol * max(abs(total), 1e-300):
            quiet += 1
            if quiet >= consecutive:
                cancel = max_term * _EPS * math.sqrt(k + 1.0)
                return SeriesResult(total, abs(t) + cancel, k - k0 + 1, max_term)
        else:
            quiet = 0
        k += 1
    raise ConvergenceError(
        f"series did not converge within {max_terms} terms",
        {"partial": total, "max_term": max_term},
    )


def sum_series_checked(
    term: Callable[[int], float],
    term_mp: Callable[[int], "mp.mpf"],
    tol_abs: float = 1e-14,
    max_terms: int = 10000,
    consecutive: int = 3,
    k0: int = 0,
) -> SeriesResult:
    """Sum an alternating/cancelling series to absolute accuracy ``tol_abs``.

    First attempts plain float64 summation; when the predicted cancellation
    error ``max_term * eps`` exceeds the target (or float64 overflows), the
    sum is redone with mpmath at a working precision chosen from the observed
    ratio ``max_term / |sum|``.
    """
    try:
        r = sum_series(term, tol=1e-16, max_terms=max_terms,
                       consecutive=consecutive, k0=k0)
        # per-term float64 error is ~50 eps (lgamma/sin argument rounding
        # scales with k), not eps, so the acceptance bound is conservative
        cancel = r.max_term * 1e-14 * math.sqrt(r.terms)
        if cancel <= tol_abs * 0.5 or cancel <= 1e-13 * abs(r.value):
            return r
        lost_digits = math.log10(max(r.max_term / max(abs(r.value), 1e-300), 1.0))
    except (ConvergenceError, OverflowError):
        lost_digits = 40.0  # refined after a probe pass below

    for attempt in range(3):
        dps = int(18 + lost_digits) + 8
        with mp.workdps(dps):
            total = mp.mpf(0)
            max_term = mp.mpf(0)
            quiet = 0
            k = k0
            stop_tol = mp.mpf(10) ** (-(dps - 4))
            while k < k0 + max_terms:
                t = term_mp(k)
                total += t
                at = abs(t)
                if at > max_term:
                    max_term = at
                if at <= stop_tol * max(abs(total), mp.mpf("1e-300")):
                    quiet += 1
                    if quiet >= consecutive:
                        break
                else:
                    quiet = 0
                k += 1
            else:
                raise ConvergenceError(
                    f"mp series did not converge within {max_terms} terms"
                )
            need = math.log10(float(max_term / max(abs(total), mp.mpf("1e-300")))
                              if max_term > 0 else 1.0)
        if need <= lost_digits + 1e-9 or need <= dps - 18:
            return SeriesResult(float(total), tol_abs * 0.25, k - k0 + 1,
                                float(max_term), used_mp=True)
        lost_digits = need  # underestimated; raise precision and retry
    raise ConvergenceError("series cancellation exceeded mp retry budget")


def sum_asymptotic(
    term: Callable[[int], float],
    tol_abs: float,
    max_terms: int = 400,
    k0: int = 1,
) -> SeriesResult:
    """Optimally truncated asymptotic series: stop at the smallest term (or
    below ``tol_abs``); the first omitted term bounds the error.

    Exact-zero terms (reciprocal-gamma poles) are skipped: they carry no
    size information for the truncation rule.
    """
    total = 0.0
    prev = math.inf
    max_term = 0.0
    k = k0
    while k < k0 + max_terms:
        t = term(k)
        k += 1
        if t == 0.0:
            continue
        at = abs(t)
        if at > prev:
            return SeriesResult(total, prev + at, k - k0, max_term)
        total += t
        max_term = max(max_term, at)
        if at <= tol_abs:
            return SeriesResult(total, at, k - k0, max_term)
        prev = at
    return SeriesResult(total, prev, k - k0, max_term)
