"""Commutative-diagram catalog and the path-independence verifier.

Every diagram is a small directed graph whose nodes carry evaluable
payloads (density-like on the original/Thorin side, transform-like on the
Laplace side) and whose arrows are the operators from
:mod:`halfline.transforms`. The verifier recomputes every node along every
simple path of evaluable arrows from the diagram's source node (the trusted
closed-form transform) and reports pointwise residuals against the node's
own payload.

Tolerances are layered by the numeric cost of a path: paths made of exact
rules (atom/pole algebra) must agree to ``tol_closed``; any path through a
quadrature-backed arrow gets ``tol_quad``; any path through the
Richardson-extrapolated limit arrow gets ``tol_limit``.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .densities import (
    bessel_rho_handles,
    extended_beta_pdf,
    frac_gamma_handles,
    frac_gamma_quarter_pdf,
    frac_gamma_quarter_r,
    frac_gamma_r,
    frac_gamma_rho_handles,
    frac_gamma_thorin,
    first_passage_handles,
    gamma_conv_handles,
    gamma_handles,
    gamma_pdf,
    gamma_rho_handles,
    h_family_thorin,
    h_rho_handles,
    stable_handles,
    stable_rho_handles,
)
from .errors import ParamsError, UnknownDiagramError
from .handles import Atom, DensityHandle, Params, PoleComponent, TransformHandle
from .transforms import (
    compound_poisson_density,
    convolve_handle,
    ell_is_integrable,
    exponent_ascent_handle,
    invert_handle,
    laplace_handle,
    limit_handle,
    log_derivative_handle,
    stieltjes_handle,
    thorin_handle,
)

ARROWS = (
    "laplace",
    "inverse_laplace",
    "log_derivative_descent",
    "limit_descent",
    "exponent_ascent",
    "compound_poisson_ascent",
    "thorin_inversion",
    "stieltjes_diagonal",
)

LEVELS = ("id_density", "levy_density", "thorin")
SIDES = ("original_domain", "laplace_domain")


@dataclass
class Node:
    id: str
    level: str
    side: str
    row: int                      # 0 = ID level, 1 = Levy level, 2 = lower rung
    col: str                      # "t" (Thorin), "x" (original), "s" (Laplace)
    payload: object               # DensityHandle or TransformHandle

    @property
    def grid_kind(self) -> str:
        return "s" if self.col == "s" else "x"


@dataclass
class Edge:
    src: str
    dst: str
    arrow: str
    evaluable: bool = True
    note: str = ""


@dataclass
class Diagram:
    name: str
    params: dict
    nodes: dict[str, Node]
    edges: list[Edge]
    source: str

    def node(self, node_id: str) -> Node:
        return self.nodes[node_id]

    def check_wiring(self):
        seen = set()
        for n in self.nodes.values():
            key = (n.row, n.col)
            if key in seen:
                raise ValueError(f"{self.name}: duplicate grid slot {key}")
            seen.add(key)
        for e in self.edges:
            if e.arrow not in ARROWS:
                raise ValueError(f"{self.name}: unknown arrow {e.arrow}")
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise ValueError(f"{self.name}: dangling edge {e}")
        # weak connectivity over all edges
        adj: dict[str, set[str]] = {nid: set() for nid in self.nodes}
        for e in self.edges:
            adj[e.src].add(e.dst)
            adj[e.dst].add(e.src)
        stack, seen2 = [self.source], {self.source}
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen2:
                    seen2.add(nb)
                    stack.append(nb)
        if seen2 != set(self.nodes):
            raise ValueError(f"{self.name}: diagram is not weakly connected")
        # every node must be reachable from the source along evaluable arrows
        reach = {self.source}
        stack = [self.source]
        fwd: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for e in self.edges:
            if e.evaluable:
                fwd[e.src].append(e.dst)
        while stack:
            for nb in fwd[stack.pop()]:
                if nb not in reach:
                    reach.add(nb)
                    stack.append(nb)
        if reach != set(self.nodes):
            missing = set(self.nodes) - reach
            raise ValueError(
                f"{self.name}: nodes {sorted(missing)} unreachable from "
                f"source along evaluable arrows")


# ---------------------------------------------------------------------------
# arrow application to payloads (composition machinery)
# ---------------------------------------------------------------------------

def _is_density(p) -> bool:
    return isinstance(p, DensityHandle)


def arrow_applicable(arrow: str, payload) -> bool:
    if arrow == "laplace":
        return _is_density(payload)
    if arrow == "stieltjes_diagonal":
        return _is_density(payload)
    if arrow == "limit_descent":
        return _is_density(payload) and payload.family is not None \
            and payload.shape is not None
    if arrow == "compound_poisson_ascent":
        return _is_density(payload)
    if arrow == "inverse_laplace":
        return isinstance(payload, TransformHandle) and (
            payload.eval_on_negative_ray is not None or payload.poles)
    if arrow == "thorin_inversion":
        return isinstance(payload, TransformHandle) and (
            payload.eval_on_negative_ray is not None or payload.poles)
    if arrow == "log_derivative_descent":
        return isinstance(payload, TransformHandle)
    if arrow == "exponent_ascent":
        return isinstance(payload, TransformHandle) \
            and payload.origin_exponent > 0
    raise ValueError(f"unknown arrow {arrow}")


def apply_arrow(arrow: str, payload, cp_mu: float = 1.0,
                tol: float | None = None):
    """Apply an arrow operator to a payload, returning the composed payload.

    ``tol`` loosens the quadrature target for compositions whose upstream
    accuracy is already limited (limit-extrapolated payloads)."""
    if arrow == "laplace":
        return laplace_handle(payload, tol=tol or 1e-11)
    if arrow == "inverse_laplace":
        return invert_handle(payload, tol=tol or 1e-10)
    if arrow == "thorin_inversion":
        return thorin_handle(payload)
    if arrow == "log_derivative_descent":
        return log_derivative_handle(payload)
    if arrow == "limit_descent":
        return limit_handle(payload)
    if arrow == "exponent_ascent":
        return exponent_ascent_handle(payload)
    if arrow == "stieltjes_diagonal":
        return stieltjes_handle(payload, tol=tol or 1e-11)
    if arrow == "compound_poisson_ascent":
        ell = payload  # normalized Levy density
        return DensityHandle(
            eval=np.vectorize(
                lambda x: compound_poisson_density(ell, cp_mu, x),
                otypes=[float]),
            atoms=(Atom(0.0, math.exp(-cp_mu)),),
            label=f"CP[{ell.label}]",
        )
    raise ValueError(f"unknown arrow {arrow}")


# arrow cost class used for the layered tolerances
def arrow_cost(arrow: str, payload) -> str:
    if arrow == "laplace":
        d = payload
        has_cont = True
        if _is_density(d) and d.atoms and getattr(d, "_atoms_only", False):
            has_cont = False
        return "quad" if has_cont else "closed"
    if arrow == "stieltjes_diagonal":
        d = payload
        if _is_density(d) and getattr(d, "_atoms_only", False):
            return "closed"
        return "quad"
    if arrow == "inverse_laplace":
        F = payload
        if isinstance(F, TransformHandle) and F.poles \
                and F.eval_on_negative_ray is None:
            return "closed"  # pure pole algebra
        return "quad"
    if arrow == "thorin_inversion":
        F = payload
        if isinstance(F, TransformHandle) and F.kind == "closed_form":
            return "closed"  # pointwise Im of a closed form
        return "quad"
    if arrow == "log_derivative_descent":
        F = payload
        if isinstance(F, TransformHandle) and (
                F.closed_deriv is not None or F.eval_complex is not None):
            return "closed"
        return "quad"
    if arrow == "exponent_ascent":
        return "quad"
    if arrow == "limit_descent":
        return "limit"
    if arrow == "compound_poisson_ascent":
        return "quad"
    raise ValueError(arrow)


_COST_ORDER = {"closed": 0, "quad": 1, "limit": 2}


# ---------------------------------------------------------------------------
# payload constructors shared by several diagrams
# ---------------------------------------------------------------------------

def _atoms_node(atoms: Sequence[Atom], cont=None, label: str = "",
                **kw) -> DensityHandle:
    if cont is None:
        h = DensityHandle(
            eval=lambda t: np.zeros_like(np.atleast_1d(np.asarray(t, float))),
            atoms=tuple(atoms), normalization="unnormalized", label=label, **kw)
        h._atoms_only = True
        return h
    return DensityHandle(eval=cont, atoms=tuple(atoms),
                         normalization="unnormalized", label=label, **kw)


def _const_density(c: float, label: str) -> DensityHandle:
    return DensityHandle(
        eval=lambda x: np.full_like(np.atleast_1d(np.asarray(x, float)), c),
        normalization="unnormalized", tail_scale=8.0, label=label)


def _exp_mix_density(weights_lams: Sequence[tuple[float, float]],
                     label: str) -> DensityHandle:
    def ev(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for w, lam in weights_lams:
            out += w * np.exp(-lam * x)
        return out

    return DensityHandle(eval=ev, normalization="unnormalized",
                         tail_scale=8.0, label=label)


def _exp_mix_transform(weights_lams: Sequence[tuple[float, float]],
                       label: str) -> TransformHandle:
    poles = tuple(PoleComponent(lam, w, 1.0) for w, lam in weights_lams)
    wl = tuple(weights_lams)

    def ev(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros_like(s)
        for w, lam in wl:
            out += w / (lam + s)
        return out

    from .handles import below_axis

    def ray(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t.shape, dtype=complex)
        for w, lam in wl:
            out += w / below_axis(lam - t)
        return out

    divergent = any(lam == 0 for _, lam in wl)
    return TransformHandle(
        eval_real=ev, eval_on_negative_ray=ray,
        eval_complex=lambda z: sum(w / (lam + z) for w, lam in wl),
        closed_deriv=lambda s: -sum(w / (lam + s) ** 2 for w, lam in wl),
        value_at_zero="divergent" if divergent else sum(
            w / lam for w, lam in wl),
        poles=poles,
        origin_exponent=0.0 if divergent else 1.0,
        ray_breakpoints=tuple(lam for _, lam in wl if lam > 0),
        label=label,
    )


def _im_ray_density(T: TransformHandle, label: str, tail_scale: float = 8.0,
                    osc_edges=None, breakpoints=()) -> DensityHandle:
    """Thorin-column payload (1/pi) Im T(e^{-i pi} t), the generic top-left
    node; signed in general."""
    from .transforms import _ray_remainder

    def ev(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        vals = np.asarray(T.eval_on_negative_ray(t), dtype=complex).imag
        return np.where(np.isfinite(vals), vals, 0.0) / math.pi

    return DensityHandle(eval=ev, nonneg=False, normalization="unnormalized",
                         tail_scale=tail_scale, osc_edges=osc_edges,
                         breakpoints=tuple(breakpoints), label=label)


# ---------------------------------------------------------------------------
# diagram builders
# ---------------------------------------------------------------------------

def _edge_block(nodes: dict[str, Node], edges: list[Edge], top: str,
                top_lt: str, low: str, low_lt: str):
    """The standard two-level block of arrows between an ID (or upper) level
    and its Levy level: Laplace pairs, descents, ascent, compound Poisson."""
    f, flt = nodes[top], nodes[top_lt]
    rho, rholt = nodes[low], nodes[low_lt]
    edges.append(Edge(top, top_lt, "laplace"))
    edges.append(Edge(
        top_lt, top, "inverse_laplace",
        evaluable=arrow_applicable("inverse_laplace", flt.payload)))
    edges.append(Edge(
        top, low, "limit_descent",
        evaluable=arrow_applicable("limit_descent", f.payload)))
    cp_ok = ell_is_integrable(rho.payload) \
        if not getattr(rho.payload, "_atoms_only", False) else False
    edges.append(Edge(low, top, "compound_poisson_ascent", evaluable=cp_ok,
                      note="dotted; defined only for integrable rho(x)/x"))
    edges.append(Edge(top_lt, low_lt, "log_derivative_descent"))
    asc_ok = (rholt.payload.origin_exponent > 0
              and flt.payload.is_normalized)
    edges.append(Edge(
        low_lt, top_lt, "exponent_ascent", evaluable=asc_ok,
        note="" if asc_ok else "exponent integral divergent at 0 or "
        "target unnormalized"))
    edges.append(Edge(low, low_lt, "laplace"))
    edges.append(Edge(
        low_lt, low, "inverse_laplace",
        evaluable=arrow_applicable("inverse_laplace", rholt.payload)))


def _thorin_block(nodes, edges, tcol: str, xcol: str, scol: str,
                  down_from: Optional[str] = None):
    """Arrows tying a Thorin-column node to its row: Laplace to the x node,
    inversion from the s node, Stieltjes diagonal back to the s node."""
    edges.append(Edge(tcol, xcol, "laplace"))
    edges.append(Edge(
        scol, tcol, "thorin_inversion",
        evaluable=arrow_applicable("thorin_inversion", nodes[scol].payload)))
    st_ok = nodes[tcol].payload.osc_edges is None
    edges.append(Edge(tcol, scol, "stieltjes_diagonal", evaluable=st_ok,
                      note="" if st_ok else
                      "conditionally convergent oscillatory tail"))
    if down_from is not None:
        edges.append(Edge(down_from, tcol, "log_derivative_descent",
                          evaluable=False,
                          note="no pointwise rule between Thorin rows"))


def _build_gamma(p: Params) -> Diagram:
    mu, lam = p.mu, p.lam
    f, flt = gamma_handles(mu, lam)
    rho, rholt = gamma_rho_handles(mu, lam)
    nodes = {
        "f": Node("f", "id_density", "original_domain", 0, "x", f),
        "f_lt": Node("f_lt", "id_density", "laplace_domain", 0, "s", flt),
        "rho": Node("rho", "levy_density", "original_domain", 1, "x", rho),
        "rho_lt": Node("rho_lt", "levy_density", "laplace_domain", 1, "s",
                       rholt),
    }
    edges: list[Edge] = []
    _edge_block(nodes, edges, "f", "f_lt", "rho", "rho_lt")
    return Diagram("gamma", {"mu": mu, "lam": lam}, nodes, edges, "f_lt")


def _build_stable_3level(p: Params, with_thorin: bool = False,
                         name: str = "stable_3level") -> Diagram:
    alpha, mu = p.alpha, p.mu
    f, flt = stable_handles(alpha, mu)
    rho, rholt = stable_rho_handles(alpha, mu)
    rung_x = _const_density(1.0 - alpha, f"{1-alpha:g}")
    rung_lt = _exp_mix_transform([(1.0 - alpha, 0.0)], f"({1-alpha:g})/s")
    nodes = {
        "f": Node("f", "id_density", "original_domain", 0, "x", f),
        "f_lt": Node("f_lt", "id_density", "laplace_domain", 0, "s", flt),
        "rho": Node("rho", "levy_density", "original_domain", 1, "x", rho),
        "rho_lt": Node("rho_lt", "levy_density", "laplace_domain", 1, "s",
                       rholt),
        "rung2": Node("rung2", "thorin", "original_domain", 2, "x", rung_x),
        "rung2_lt": Node("rung2_lt", "thorin", "laplace_domain", 2, "s",
                         rung_lt),
    }
    edges: list[Edge] = []
    _edge_block(nodes, edges, "f", "f_lt", "rho", "rho_lt")
    _edge_block(nodes, edges, "rho", "rho_lt", "rung2", "rung2_lt")

    if with_thorin:
        spa = math.sin(math.pi * alpha)

        def osc(lo, alpha=alpha, mu=mu, spa=spa):
            out, k = [], 1
            while len(out) < 400:
                tk = (k * math.pi / (mu * spa)) ** (1.0 / alpha)
                if tk > lo:
                    out.append(tk)
                k += 1
                if out and out[-1] > 1e7:
                    break
            return out

        O = _im_ray_density(flt, label="(1/pi) Im f~(ray)", osc_edges=osc,
                            tail_scale=(1.0 / mu) ** (1.0 / alpha) + 1.0)
        c = mu * alpha / math.pi * spa
        A = DensityHandle(
            eval=lambda t: c * np.atleast_1d(np.asarray(t, float))
            ** (alpha - 1.0),
            normalization="unnormalized", origin_exponent=alpha,
            tail_scale=8.0, label="(mu a/pi) sin(pi a) t^(a-1)")
        Xn = _atoms_node([Atom(0.0, 1.0 - alpha)], label=f"({1-alpha:g}) d(t)")
        nodes["u"] = Node("u", "id_density", "original_domain", 0, "t", O)
        nodes["u_levy"] = Node("u_levy", "levy_density", "original_domain",
                               1, "t", A)
        nodes["u_rung"] = Node("u_rung", "thorin", "original_domain", 2, "t",
                               Xn)
        _thorin_block(nodes, edges, "u", "f", "f_lt", down_from=None)
        edges.append(Edge("u", "u_levy", "log_derivative_descent",
                          evaluable=False,
                          note="no pointwise rule between Thorin rows"))
        _thorin_block(nodes, edges, "u_levy", "rho", "rho_lt")
        _thorin_block(nodes, edges, "u_rung", "rung2", "rung2_lt")
    return Diagram(name, {"alpha": alpha, "mu": mu}, nodes, edges, "f_lt")


def _build_stable_ggc(p: Params) -> Diagram:
    return _build_stable_3level(p, with_thorin=True, name="stable_ggc")


def _build_gamma_conv(p: Params) -> Diagram:
    mu1, lam1, mu2, lam2 = p.mu, p.lam, p.mu2, p.lam2
    f, flt = gamma_conv_handles(mu1, lam1, mu2, lam2)
    rho = _exp_mix_density([(mu1, lam1), (mu2, lam2)],
                           f"{mu1:g}e^-{lam1:g}x+{mu2:g}e^-{lam2:g}x")
    rholt = _exp_mix_transform([(mu1, lam1), (mu2, lam2)],
                               f"{mu1:g}/({lam1:g}+s)+{mu2:g}/({lam2:g}+s)")
    nodes = {
        "f": Node("f", "id_density", "original_domain", 0, "x", f),
        "f_lt": Node("f_lt", "id_density", "laplace_domain", 0, "s", flt),
        "rho": Node("rho", "levy_density", "original_domain", 1, "x", rho),
        "rho_lt": Node("rho_lt", "levy_density", "laplace_domain", 1, "s",
                       rholt),
    }
    edges: list[Edge] = []
    _edge_block(nodes, edges, "f", "f_lt", "rho", "rho_lt")
    return Diagram("gamma_conv",
                   {"mu": mu1, "lam": lam1, "mu2": mu2, "lam2": lam2},
                   nodes, edges, "f_lt")


def _build_gamma_conv_half(p: Params) -> Diagram:
    mu = p.mu
    f, flt = first_passage_handles(mu)
    rho, rholt = bessel_rho_handles(mu)
    rung_x = _exp_mix_density([(0.5, 0.0), (0.5, 1.0)], "(1+e^-x)/2")
    rung_lt = _exp_mix_transform([(0.5, 0.0), (0.5, 1.0)],
                                 "(1/s+1/(1+s))/2")
    O = _im_ray_density(flt, label="(1/pi) Im (sqrt(1-t)+i sqrt(t))^2mu",
                        breakpoints=(1.0,), tail_scale=4.0 + 2.0 * mu)
    A = DensityHandle(
        eval=lambda t: mu * extended_beta_pdf(0.5, 0.5,
                                              np.atleast_1d(np.asarray(t, float))),
        support=(0.0, 1.0), normalization="unnormalized",
        origin_exponent=0.5, label="mu arcsine")
    Xn = _atoms_node([Atom(0.0, 0.5), Atom(1.0, 0.5)], label="(d(t)+d(t-1))/2")
    nodes = {
        "f": Node("f", "id_density", "original_domain", 0, "x", f),
        "f_lt": Node("f_lt", "id_density", "laplace_domain", 0, "s", flt),
        "rho": Node("rho", "levy_density", "original_domain", 1, "x", rho),
        "rho_lt": Node("rho_lt", "levy_density", "laplace_domain", 1, "s",
                       rholt),
        "rung2": Node("rung2", "thorin", "original_domain", 2, "x", rung_x),
        "rung2_lt": Node("rung2_lt", "thorin", "laplace_domain", 2, "s",
                         rung_lt),
        "u": Node("u", "id_density", "original_domain", 0, "t", O),
        "u_levy": Node("u_levy", "levy_density", "original_domain", 1, "t", A),
        "u_rung": Node("u_rung", "thorin", "original_domain", 2, "t", Xn),
    }
    edges: list[Edge] = []
    _edge_block(nodes, edges, "f", "f_lt", "rho", "rho_lt")
    _edge_block(nodes, edges, "rho", "rho_lt", "rung2", "rung2_lt")
    _thorin_block(nodes, edges, "u", "f", "f_lt")
    edges.append(Edge("u", "u_levy", "log_derivative_descent",
                      evaluable=False,
                      note="no pointwise rule between Thorin rows"))
    _thorin_block(nodes, edges, "u_levy", "rho", "rho_lt")
    _thorin_block(nodes, edges, "u_rung", "rung2", "rung2_lt")
    return Diagram("gamma_conv_half", {"mu": mu}, nodes, edges, "f_lt")


def _build_h_theta(p: Params, variant: int) -> Diagram:
    alpha, theta, mu = p.alpha, p.theta, p.mu
    rho, rholt = h_rho_handles(alpha, theta, mu, variant)
    flt = exponent_ascent_handle(rholt)
    flt.label = f"h~(v{variant})"
    f = invert_handle(flt)
    f.normalization = "probability"
    f.nonneg = True
    f.origin_exponent = 1.0
    f.family = lambda nu: invert_handle(
        exponent_ascent_handle(h_rho_handles(alpha, theta, nu, variant)[1]))
    f.shape = mu
    f.label = f"h(v{variant})"
    A = DensityHandle(
        eval=lambda t: np.atleast_1d(
            h_family_thorin(alpha, theta, mu, t, variant)),
        normalization="unnormalized", origin_exponent=theta if theta > 0
        else (alpha if variant == 1 else 1.0 - alpha),
        breakpoints=(1.0,), tail_scale=8.0,
        label=f"h thorin v{variant}")
    O = _im_ray_density(flt, label="(1/pi) Im h~(ray)", tail_scale=8.0,
                        breakpoints=(1.0,))
    if variant == 1:
        masses = [(1.0 - alpha, 0.0), (alpha - theta, 1.0)]
    else:
        masses = [(alpha - theta, 0.0), (1.0 - alpha, 1.0)]
    rung_x = _exp_mix_density(masses, "rung x")
    rung_lt = _exp_mix_transform(masses, "rung s")
    Xn = _atoms_node([Atom(loc, w) for w, loc in masses], label="rung atoms")
    nodes = {
        "f": Node("f", "id_density", "original_domain", 0, "x", f),
        "f_lt": Node("f_lt", "id_density", "laplace_domain", 0, "s", flt),
        "rho": Node("rho", "levy_density", "original_domain", 1, "x", rho),
        "rho_lt": Node("rho_lt", "levy_density", "laplace_domain", 1, "s",
                       rholt),
        "rung2": Node("rung2", "thorin", "original_domain", 2, "x", rung_x),
        "rung2_lt": Node("rung2_lt", "thorin", "laplace_domain", 2, "s",
                         rung_lt),
        "u": Node("u", "id_density", "original_domain", 0, "t", O),
        "u_levy": Node("u_levy", "levy_density", "original_domain", 1, "t", A),
        "u_rung": Node("u_rung", "thorin", "original_domain", 2, "t", Xn),
    }
    edges: list[Edge] = []
    _edge_block(nodes, edges, "f", "f_lt", "rho", "rho_lt")
    _edge_block(nodes, edges, "rho", "rho_lt", "rung2", "rung2_lt")
    _thorin_block(nodes, edges, "u", "f", "f_lt")
    edges.append(Edge("u", "u_levy", "log_derivative_descent",
                      evaluable=False,
                      note="no pointwise rule between Thorin rows"))
    _thorin_block(nodes, edges, "u_levy", "rho", "rho_lt")
    _thorin_block(nodes, edges, "u_rung", "rung2", "rung2_lt")
    return Diagram(f"h_theta_v{variant}",
                   {"alpha": alpha, "theta": theta, "mu": mu},
                   nodes, edges, "f_lt")


def _build_frac_gamma(p: Params, name: str = "frac_gamma",
                      quarter: bool = False) -> Diagram:
    alpha, lam, mu = p.alpha, p.lam, p.mu
    f, flt = frac_gamma_handles(alpha, lam, mu)
    rho, rholt = frac_gamma_rho_handles(alpha, lam, mu)
    if quarter:
        # payloads from the alpha = 1/2 composition integrals, checked
        # against the generic routes by the diagram itself
        f = f.with_(
            eval=np.vectorize(
                lambda x: float(frac_gamma_quarter_pdf(lam, mu, x)),
                otypes=[float]),
            label="m_(1/4) via half-kernel integral")
        rho = rho.with_(
            eval=np.vectorize(
                lambda x: mu * float(frac_gamma_quarter_r(lam, x)),
                otypes=[float]),
            label="mu r_(1/4) via half-kernel integral")
    A = DensityHandle(
        eval=lambda t: frac_gamma_thorin(alpha, lam, mu,
                                         np.atleast_1d(np.asarray(t, float))),
        normalization="unnormalized", origin_exponent=alpha,
        tail_scale=8.0 / lam ** (1.0 / alpha), label="mu phi_(a,lam)")
    O = _im_ray_density(flt, label="(1/pi) Im m~(ray)",
                        tail_scale=2.0 * lam ** (-1.0 / alpha) + 2.0)
    nodes = {
        "f": Node("f", "id_density", "original_domain", 0, "x", f),
        "f_lt": Node("f_lt", "id_density", "laplace_domain", 0, "s", flt),
        "rho": Node("rho", "levy_density", "original_domain", 1, "x", rho),
        "rho_lt": Node("rho_lt", "levy_density", "laplace_domain", 1, "s",
                       rholt),
        "u": Node("u", "id_density", "original_domain", 0, "t", O),
        "u_levy": Node("u_levy", "levy_density", "original_domain", 1, "t", A),
    }
    edges: list[Edge] = []
    _edge_block(nodes, edges, "f", "f_lt", "rho", "rho_lt")
    _thorin_block(nodes, edges, "u", "f", "f_lt")
    edges.append(Edge("u", "u_levy", "log_derivative_descent",
                      evaluable=False,
                      note="no pointwise rule between Thorin rows"))
    _thorin_block(nodes, edges, "u_levy", "rho", "rho_lt")
    params = {"alpha": alpha, "lam": lam, "mu": mu}
    return Diagram(name, params, nodes, edges, "f_lt")


def _build_conv_centred(p: Params) -> Diagram:
    alpha, lam, mu = p.alpha, p.lam, p.mu
    f, flt = frac_gamma_handles(alpha, lam, mu)
    _, rholt = frac_gamma_rho_handles(alpha, lam, mu)

    # middle x node: mu alpha {g_(1-alpha,0) * m_(alpha,lam)}/lam, the
    # convolution-centred route to mu r_(alpha,lam)
    g_half = gamma_handles(1.0 - alpha, 0.0)[0]
    m_unit = frac_gamma_handles(alpha, lam, 1.0)[0]
    conv = convolve_handle(g_half, m_unit)

    def rho_eval(x, c=mu * alpha / lam):
        return c * conv.eval(np.atleast_1d(np.asarray(x, float)))

    def rho_fam(nuv, alpha=alpha, lam=lam):
        from .densities import mixed_power_frac_transform

        h = invert_handle(mixed_power_frac_transform(alpha, lam, nuv))
        h.normalization = "unnormalized"
        return h

    rho = DensityHandle(
        eval=rho_eval, normalization="unnormalized", origin_exponent=1.0,
        tail_scale=8.0 / lam ** (1.0 / alpha),
        family=rho_fam, shape=1.0,
        label="mu a {g*m}/lam")

    A = DensityHandle(
        eval=lambda t: frac_gamma_thorin(alpha, lam, mu,
                                         np.atleast_1d(np.asarray(t, float))),
        normalization="unnormalized", origin_exponent=alpha,
        tail_scale=8.0 / lam ** (1.0 / alpha), label="mu phi")
    O = _im_ray_density(flt, label="(1/pi) Im m~(ray)",
                        tail_scale=2.0 * lam ** (-1.0 / alpha) + 2.0)

    def rung_eval(x, alpha=alpha, lam=lam):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (1.0 - alpha) + np.array(
            [float(frac_gamma_r(alpha, lam, xi)) for xi in x])

    rung_x = DensityHandle(eval=rung_eval, normalization="unnormalized",
                           tail_scale=8.0, label="(1-a)+r_(a,lam)")

    def rung_lt_eval(s, alpha=alpha, lam=lam):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return (1.0 - alpha) / s + alpha * s ** (alpha - 1.0) / (lam + s ** alpha)

    def rung_lt_ray(t, alpha=alpha, lam=lam):
        from .handles import below_axis, ray_points
        t = np.atleast_1d(np.asarray(t, dtype=float))
        sp = ray_points(t)
        return ((1.0 - alpha) / below_axis(-t)
                + alpha * sp ** (alpha - 1.0)
                / (lam + np.exp(-1j * math.pi * alpha) * t ** alpha))

    rung_lt = TransformHandle(
        eval_real=rung_lt_eval, eval_on_negative_ray=rung_lt_ray,
        eval_complex=lambda z: (1.0 - alpha) / z
        + alpha * z ** (alpha - 1.0) / (lam + z ** alpha),
        value_at_zero="divergent",
        poles=(PoleComponent(0.0, 1.0 - alpha, 1.0),),
        origin_exponent=0.0, label="(1-a)/s + a s^(a-1)/(lam+s^a)")

    phi_unit = lambda t: frac_gamma_thorin(alpha, lam, 1.0,
                                           np.atleast_1d(np.asarray(t, float)))
    Xn = _atoms_node([Atom(0.0, 1.0 - alpha)], cont=phi_unit,
                     origin_exponent=alpha,
                     label="(1-a) d(t) + phi_(a,lam)")

    nodes = {
        "f": Node("f", "id_density", "original_domain", 0, "x", f),
        "f_lt": Node("f_lt", "id_density", "laplace_domain", 0, "s", flt),
        "rho": Node("rho", "levy_density", "original_domain", 1, "x", rho),
        "rho_lt": Node("rho_lt", "levy_density", "laplace_domain", 1, "s",
                       rholt),
        "rung2": Node("rung2", "thorin", "original_domain", 2, "x", rung_x),
        "rung2_lt": Node("rung2_lt", "thorin", "laplace_domain", 2, "s",
                         rung_lt),
        "u": Node("u", "id_density", "original_domain", 0, "t", O),
        "u_levy": Node("u_levy", "levy_density", "original_domain", 1, "t", A),
        "u_rung": Node("u_rung", "thorin", "original_domain", 2, "t", Xn),
    }
    edges: list[Edge] = []
    _edge_block(nodes, edges, "f", "f_lt", "rho", "rho_lt")
    _edge_block(nodes, edges, "rho", "rho_lt", "rung2", "rung2_lt")
    _thorin_block(nodes, edges, "u", "f", "f_lt")
    edges.append(Edge("u", "u_levy", "log_derivative_descent",
                      evaluable=False,
                      note="no pointwise rule between Thorin rows"))
    _thorin_block(nodes, edges, "u_levy", "rho", "rho_lt")
    _thorin_block(nodes, edges, "u_rung", "rung2", "rung2_lt")
    return Diagram("conv_centred", {"alpha": alpha, "lam": lam, "mu": mu},
                   nodes, edges, "f_lt")


_CATALOG: dict[str, tuple[Callable[[Params], Diagram], dict]] = {
    "gamma": (_build_gamma, {"mu": 2.0, "lam": 1.0}),
    "stable_3level": (lambda p: _build_stable_3level(p),
                      {"alpha": 0.5, "mu": 1.0}),
    "stable_ggc": (_build_stable_ggc, {"alpha": 0.5, "mu": 1.0}),
    "gamma_conv": (_build_gamma_conv,
                   {"mu": 0.45, "lam": 0.5, "mu2": 0.35, "lam2": 1.5}),
    "gamma_conv_half": (_build_gamma_conv_half, {"mu": 1.0}),
    "h_theta_v1": (lambda p: _build_h_theta(p, 1),
                   {"alpha": 0.5, "theta": 0.25, "mu": 1.0}),
    "h_theta_v2": (lambda p: _build_h_theta(p, 2),
                   {"alpha": 0.5, "theta": 0.25, "mu": 1.0}),
    "frac_gamma": (lambda p: _build_frac_gamma(p),
                   {"alpha": 0.6, "lam": 1.0, "mu": 1.0}),
    "frac_gamma_half": (
        lambda p: _build_frac_gamma(
            Params(alpha=0.5, lam=p.lam, mu=p.mu), name="frac_gamma_half"),
        {"lam": 1.0, "mu": 1.0}),
    "frac_gamma_quarter": (
        lambda p: _build_frac_gamma(
            Params(alpha=0.25, lam=p.lam, mu=p.mu),
            name="frac_gamma_quarter", quarter=True),
        {"lam": 1.0, "mu": 1.0}),
    "conv_centred": (_build_conv_centred,
                     {"alpha": 0.5, "lam": 1.0, "mu": 1.0}),
}


def catalog_list() -> list[dict]:
    """Stable-ordered catalog: name plus the Params fields it requires with
    their documented defaults."""
    out = []
    for name, (_, defaults) in _CATALOG.items():
        out.append({"name": name, "params": dict(defaults)})
    return out


def build_diagram(name: str, params: Optional[Params] = None) -> Diagram:
    """Wire up a catalog diagram; closed-form payloads are attached wherever
    one is displayed, quadrature-backed payloads elsewhere."""
    if name not in _CATALOG:
        raise UnknownDiagramError(name)
    builder, defaults = _CATALOG[name]
    if params is None:
        params = Params(**defaults)
    try:
        d = builder(params)
    except (TypeError, AttributeError) as exc:
        raise ParamsError("params", f"invalid for diagram {name}: {exc}")
    d.check_wiring()
    return d


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    diagram: str
    params: dict
    tol: float
    entries: list[dict] = field(default_factory=list)
    max_residual: float = 0.0
    pass_: bool = True

    def to_dict(self) -> dict:
        return {
            "diagram": self.diagram,
            "params": self.params,
            "tol": self.tol,
            "entries": self.entries,
            "max_residual": self.max_residual,
            "pass": self.pass_,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _enumerate_paths(diag: Diagram, max_len: int = 4):
    """All simple paths of evaluable edges out of the source, as edge lists.

    A limit-descent arrow ends a path: quadrature on top of the Richardson
    extrapolation compounds its small-argument breakdown into the integral,
    so continuations beyond a limit carry no usable information. The edges a
    pruned continuation would have exercised are still checked one arrow at
    a time from their own from-node payloads (see verify_commutativity).
    """
    fwd: dict[str, list[Edge]] = {nid: [] for nid in diag.nodes}
    for e in diag.edges:
        if e.evaluable:
            fwd[e.src].append(e)
    paths: list[list[Edge]] = []

    def walk(at: str, sofar: list[Edge], visited: set[str]):
        if len(sofar) >= max_len:
            return
        if sofar and sofar[-1].arrow == "limit_descent":
            return
        for e in fwd[at]:
            if e.dst in visited:
                continue
            nxt = sofar + [e]
            paths.append(nxt)
            walk(e.dst, nxt, visited | {e.dst})

    walk(diag.source, [], {diag.source})
    return paths


def _compose_path(diag: Diagram, path: list[Edge]):
    """Compose arrow operators along a path, relaying through a node's own
    payload whenever the running composition lacks the analytic capability
    (ray evaluator, shape family, ...) an arrow needs. Relays are recorded in
    the descriptor; each relay point is itself verified by a shorter path."""
    payload = diag.node(diag.source).payload
    desc = [diag.source]
    cost = "closed"
    relayed = False
    for e in path:
        if not arrow_applicable(e.arrow, payload):
            payload = diag.node(e.src).payload
            relayed = True
            if not arrow_applicable(e.arrow, payload):
                return None, None, None  # edge not computable from here
        step_cost = arrow_cost(e.arrow, payload)
        if _COST_ORDER[step_cost] > _COST_ORDER[cost]:
            cost = step_cost
        # quadrature on top of a limit-extrapolated payload cannot beat the
        # extrapolation's own ~1e-5 accuracy; loosen its target accordingly
        tol_hint = 3e-8 if cost == "limit" else None
        payload = apply_arrow(e.arrow, payload, tol=tol_hint)
        desc.append(("~" if relayed else "") + f"-{e.arrow}-> {e.dst}")
        relayed = False
    return payload, " ".join(desc), cost


def _payload_values(payload, grid: np.ndarray) -> np.ndarray:
    if isinstance(payload, DensityHandle):
        return np.asarray(payload.eval(grid), dtype=float)
    return np.asarray(payload.eval_real(grid), dtype=float)


def _atom_entries(node: Node, got_payload, ref_payload) -> list[tuple]:
    ref_atoms = sorted(getattr(ref_payload, "atoms", ()) or (),
                       key=lambda a: a.location)
    got_atoms = sorted(getattr(got_payload, "atoms", ()) or (),
                       key=lambda a: a.location)
    rows = []
    n = max(len(ref_atoms), len(got_atoms))
    for i in range(n):
        if i < len(ref_atoms) and i < len(got_atoms) and abs(
                ref_atoms[i].location - got_atoms[i].location) < 1e-12:
            rows.append((f"atom@{ref_atoms[i].location:g}",
                         ref_atoms[i].mass, got_atoms[i].mass))
        else:
            ra = ref_atoms[i].mass if i < len(ref_atoms) else 0.0
            ga = got_atoms[i].mass if i < len(got_atoms) else 0.0
            loc = (ref_atoms[i] if i < len(ref_atoms)
                   else got_atoms[i]).location
            rows.append((f"atom@{loc:g}", ra, ga))
    return rows


def verify_commutativity(
    diag: Diagram,
    x_grid: Sequence[float],
    s_grid: Sequence[float],
    tol: float = 1e-6,
    tol_closed: float = 1e-9,
    tol_limit: float = 1e-5,
    max_len: int = 4,
) -> VerificationReport:
    """Recompute every node along every simple path of evaluable arrows from
    the source (length <= max_len) and compare with the node's own payload.

    The report's ``max_residual`` is tolerance-normalized so that
    ``pass <=> max_residual <= tol`` also holds under layered tolerances:
    each entry's residual is scaled by ``tol / (its layer tolerance)``.
    """
    x_grid = np.asarray(list(x_grid), dtype=float)
    s_grid = np.asarray(list(s_grid), dtype=float)
    paths = _enumerate_paths(diag, max_len=max_len)
    report = VerificationReport(diag.name, dict(diag.params), tol)
    layer_tol = {"closed": tol_closed, "quad": tol, "limit": tol_limit}

    tasks = []
    for path in paths:
        node = diag.node(path[-1].dst)
        tasks.append((path, node))
    # single-arrow checks from each edge's own from-node payload: these give
    # the per-edge half of the report and keep every arrow covered even
    # where path composition is pruned
    edge_tasks = [e for e in diag.edges if e.evaluable]

    # each node's own payload is the reference column; evaluate it once
    ref_cache: dict[str, np.ndarray] = {}
    for node in diag.nodes.values():
        if not getattr(node.payload, "_atoms_only", False):
            grid = x_grid if node.grid_kind == "x" else s_grid
            ref_cache[node.id] = _payload_values(node.payload, grid)

    def run(task):
        path, node = task
        composed, desc, cost = _compose_path(diag, path)
        rows = []
        if composed is None:
            return rows
        grid = x_grid if node.grid_kind == "x" else s_grid
        this_tol = layer_tol[cost]
        ref_payload = node.payload
        want_atoms = bool(getattr(ref_payload, "atoms", ()))
        if isinstance(composed, DensityHandle) \
                and isinstance(ref_payload, DensityHandle):
            if want_atoms or getattr(composed, "atoms", ()):
                for tag, ref, got in _atom_entries(node, composed, ref_payload):
                    rows.append({
                        "node": node.id, "path": desc, "x_or_s": tag,
                        "ref": ref, "got": got,
                        "resid": abs(got - ref), "tol": this_tol,
                    })
        if not getattr(ref_payload, "_atoms_only", False):
            ref = ref_cache[node.id]
            got = _payload_values(composed, grid)
            for xi, r, g in zip(grid, ref, got):
                if not math.isfinite(float(r)):
                    continue  # grid point sits on the payload's +inf marker
                resid = abs(float(g) - float(r)) if math.isfinite(float(g)) \
                    else math.inf
                rows.append({
                    "node": node.id, "path": desc, "x_or_s": float(xi),
                    "ref": float(r), "got": float(g),
                    "resid": resid, "tol": this_tol,
                })
        return rows

    def run_edge(e: Edge):
        node = diag.node(e.dst)
        src_payload = diag.node(e.src).payload
        cost = arrow_cost(e.arrow, src_payload)
        tol_hint = 3e-8 if cost == "limit" else None
        composed = apply_arrow(e.arrow, src_payload, tol=tol_hint)
        desc = f"edge: {e.src} -{e.arrow}-> {e.dst}"
        grid = x_grid if node.grid_kind == "x" else s_grid
        this_tol = layer_tol[cost]
        ref_payload = node.payload
        rows = []
        if isinstance(composed, DensityHandle) and isinstance(
                ref_payload, DensityHandle) and (
                getattr(ref_payload, "atoms", ())
                or getattr(composed, "atoms", ())):
            for tag, ref, got in _atom_entries(node, composed, ref_payload):
                rows.append({"node": node.id, "path": desc, "x_or_s": tag,
                             "ref": ref, "got": got, "resid": abs(got - ref),
                             "tol": this_tol})
        if not getattr(ref_payload, "_atoms_only", False):
            ref = ref_cache[node.id]
            got = _payload_values(composed, grid)
            for xi, r, g in zip(grid, ref, got):
                if not math.isfinite(float(r)):
                    continue
                resid = abs(float(g) - float(r)) if math.isfinite(float(g)) \
                    else math.inf
                rows.append({"node": node.id, "path": desc,
                             "x_or_s": float(xi), "ref": float(r),
                             "got": float(g), "resid": resid,
                             "tol": this_tol})
        return rows

    all_work = [(run, t) for t in tasks] + [(run_edge, e) for e in edge_tasks]
    nthreads = os.environ.get("HALFLINE_THREADS")
    nthreads = int(nthreads) if nthreads else (os.cpu_count() or 1)
    if nthreads > 1 and len(all_work) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            all_rows = list(ex.map(lambda fw: fw[0](fw[1]), all_work))
    else:
        all_rows = [fn(arg) for fn, arg in all_work]

    entries = [row for rows in all_rows for row in rows]
    entries.sort(key=lambda r: (r["node"], r["path"], str(r["x_or_s"])))
    report.entries = entries
    scaled = 0.0
    for r in entries:
        scaled = max(scaled, r["resid"] / r["tol"])
    report.max_residual = scaled * tol
    report.pass_ = scaled <= 1.0
    return report


def check_edge(edge: Edge, diag: Diagram, points: Sequence[float],
               tol: float = 1e-6) -> VerificationReport:
    """Single-arrow check: apply the edge's operator to the from-node payload
    and compare pointwise with the to-node payload."""
    node = diag.node(edge.dst)
    report = VerificationReport(diag.name, dict(diag.params), tol)
    if not edge.evaluable:
        report.entries = []
        report.pass_ = True
        return report
    src_payload = diag.node(edge.src).payload
    cost = arrow_cost(edge.arrow, src_payload)
    composed = apply_arrow(edge.arrow, src_payload)
    desc = f"{edge.src} -{edge.arrow}-> {edge.dst}"
    grid = np.asarray(list(points), dtype=float)
    rows = []
    ref_payload = node.payload
    if isinstance(composed, DensityHandle) and isinstance(
            ref_payload, DensityHandle) and (
            getattr(ref_payload, "atoms", ()) or getattr(composed, "atoms", ())):
        for tag, ref, got in _atom_entries(node, composed, ref_payload):
            rows.append({"node": node.id, "path": desc, "x_or_s": tag,
                         "ref": ref, "got": got, "resid": abs(got - ref),
                         "tol": tol})
    if not getattr(ref_payload, "_atoms_only", False):
        ref = _payload_values(ref_payload, grid)
        got = _payload_values(composed, grid)
        for xi, r, g in zip(grid, ref, got):
            rows.append({"node": node.id, "path": desc, "x_or_s": float(xi),
                         "ref": float(r), "got": float(g),
                         "resid": abs(float(g) - float(r)), "tol": tol})
    report.entries = rows
    report.max_residual = max((r["resid"] for r in rows), default=0.0)
    report.pass_ = report.max_residual <= tol
    return report
