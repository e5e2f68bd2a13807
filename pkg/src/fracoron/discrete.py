"""Grid analogue of X_0: the nonlocal form, the constrained Rayleigh quotient,
its projected gradient flow, the barycenter map, and the min-max solver.

Grid functions are identified with the piecewise multilinear interpolant Iu
of their nodal values. With the default "galerkin" policy the form is the
exact Gagliardo energy of Iu and the critical integral is evaluated by
element Gauss quadrature, so the discrete quotient is the continuum quotient
of Iu and never drops below S. The "drop" policy is the plain Riemann pair
sum with the self-pair removed and a lumped critical integral.

Gradients are Riesz representatives for the node product <f, g>_h = h^N f.g.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import _lattice
from .bubbles import Bubble, Cutoff, TruncatedBubble, eval_bubble, eval_truncated, h_interp
from .core import (AnnulusDomain, FracoronError, FracParams, GridFunction, ZeroFunctionError,
                   grid_points, grid_spacing, make_grid)

POLICIES = ("galerkin", "drop")


class SizeGuardError(FracoronError):
    """The dense form would exceed the configured pair budget."""


class ConstraintError(FracoronError):
    """A field is not on the constraint manifold within tolerance."""


class DegeneracyError(FracoronError):
    """A loop passes through the origin."""


class UnsupportedDimensionError(FracoronError):
    pass


class StagnationError(FracoronError):
    """Line search found no decrease; carries the last state."""

    def __init__(self, msg, state):
        super().__init__(msg)
        self.state = state


# ------------------------------------------------------------ form

@dataclass
class NonlocalForm:
    """a(u, v) = u^T A v on the interior nodes, plus the critical-integral rule.

    The critical integral is sum_q W_q |(E u)_q|^p, with E mapping nodal
    values to quadrature points at positions xq.
    """

    domain: AnnulusDomain
    resolution: int
    params: FracParams
    diagonal_policy: str
    matrix: np.ndarray = field(repr=False)
    interp: sp.csr_matrix = field(repr=False)
    qweights: np.ndarray = field(repr=False)
    qpoints: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)
    h: float = 0.0

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """Pair weights w_ij = -A_ij / 2 between distinct interior nodes."""
        w = -0.5 * self.matrix.copy()
        np.fill_diagonal(w, 0.0)
        return w

    @property
    def node_points(self) -> np.ndarray:
        return grid_points(self.domain, self.resolution)[self.mask]

    def vector(self, u) -> np.ndarray:
        if isinstance(u, GridFunction):
            if u.resolution != self.resolution or u.domain != self.domain:
                raise ValueError("grid function does not live on this form's grid")
            return u.interior()
        u = np.asarray(u, float)
        if u.shape != (self.size,):
            raise ValueError(f"expected {self.size} interior values, got shape {u.shape}")
        return u

    def grid(self, vec) -> GridFunction:
        g = GridFunction(self.domain, self.resolution, np.zeros(self.mask.shape), self.mask)
        return g.with_interior(vec)

    def a(self, u, v=None) -> float:
        u = self.vector(u)
        v = u if v is None else self.vector(v)
        return float(u @ (self.matrix @ v))


def _lattice_index(domain: AnnulusDomain, resolution: int, mask: np.ndarray) -> np.ndarray:
    idx = np.stack(np.meshgrid(*([np.arange(resolution)] * domain.dim), indexing="ij"), -1)
    return idx[mask]


def _element_rule(domain, resolution, mask, order):
    """Sparse interpolation to Gauss points of every cell touching an interior node."""
    n = domain.dim
    res = resolution
    h = grid_spacing(domain, res)
    node_id = -np.ones(mask.shape, int)
    node_id[mask] = np.arange(int(mask.sum()))
    # cells are labeled by their lower corner, from -1 to res-1 per axis
    low = np.stack(np.meshgrid(*([np.arange(-1, res)] * n), indexing="ij"), -1).reshape(-1, n)
    corners = np.array(list(np.ndindex(*([2] * n))))
    cid = np.full((len(low), len(corners)), -1)
    for j, c in enumerate(corners):
        pos = low + c
        ok = np.all((pos >= 0) & (pos < res), 1)
        cid[ok, j] = node_id[tuple(pos[ok].T)]
    keep = np.any(cid >= 0, 1)
    low, cid = low[keep], cid[keep]
    g, gw = np.polynomial.legendre.leggauss(order)
    g, gw = 0.5 * (g + 1.0), 0.5 * gw
    tq = np.stack(np.meshgrid(*([g] * n), indexing="ij"), -1).reshape(-1, n)
    wq = np.prod(np.stack(np.meshgrid(*([gw] * n), indexing="ij"), -1).reshape(-1, n), 1)
    # basis value of each corner at each Gauss point
    phi = np.prod(np.where(corners[None, :, :] == 1, tq[:, None, :], 1.0 - tq[:, None, :]), -1)
    ncell, nq, nc = len(low), len(tq), len(corners)
    rows = np.repeat(np.arange(ncell * nq), nc).reshape(ncell, nq, nc)
    cols = np.broadcast_to(cid[:, None, :], (ncell, nq, nc))
    vals = np.broadcast_to(phi[None], (ncell, nq, nc))
    sel = cols >= 0
    E = sp.csr_matrix((vals[sel], (rows[sel], cols[sel])), shape=(ncell * nq, int(mask.sum())))
    origin = np.array([c - h * (res // 2) for c in domain.center])
    xq = (origin + h * (low[:, None, :] + tq[None])).reshape(-1, n)
    W = np.tile(wq, ncell) * h ** n
    return E, W, xq


def _lumped_rule(domain, resolution, mask):
    n = int(mask.sum())
    h = grid_spacing(domain, resolution)
    xq = grid_points(domain, resolution)[mask]
    return sp.identity(n, format="csr"), np.full(n, h ** domain.dim), xq


def assemble_form(domain: AnnulusDomain, resolution: int, params: FracParams,
                  diagonal_policy: str = "galerkin", pair_budget: float = 4e7,
                  quad_order: int = 3) -> NonlocalForm:
    """Dense interior stiffness for the chosen policy.

    Interactions with the exterior (the part of Q with one node outside
    Omega) are folded into the diagonal through lattice sums, so the form
    is the energy over all of R^N of a field vanishing off Omega.
    """
    if diagonal_policy not in POLICIES:
        raise ValueError(f"diagonal_policy must be one of {POLICIES}")
    if domain.dim != params.dim:
        raise ValueError("domain and parameter dimensions differ")
    grid = make_grid(domain, resolution)
    mask = grid.mask
    n = int(mask.sum())
    if float(n) ** 2 > pair_budget:
        raise SizeGuardError(f"{n} interior nodes exceed the pair budget {pair_budget:g}")
    h = grid_spacing(domain, resolution)
    N, s = params.dim, params.s
    kmax = resolution - 1
    if diagonal_policy == "galerkin":
        table = _lattice.galerkin_table(N, float(s), kmax)
        E, W, xq = _element_rule(domain, resolution, mask, quad_order)
    else:
        table = _lattice.riemann_table(N, float(s), kmax)
        E, W, xq = _lumped_rule(domain, resolution, mask)
    idx = _lattice_index(domain, resolution, mask)
    A = np.empty((n, n))
    block = max(1, int(2e6 // max(n, 1)))
    for start in range(0, n, block):
        d = np.abs(idx[start:start + block, None, :] - idx[None, :, :])
        d.sort(axis=-1)
        A[start:start + block] = table[tuple(np.moveaxis(d, -1, 0))]
    A *= h ** (N - 2.0 * s)
    A = 0.5 * (A + A.T)
    return NonlocalForm(domain, resolution, params, diagonal_policy, A, E, W, xq, mask, h)


# ------------------------------------------------------------ functionals

def _crit(u: np.ndarray, form: NonlocalForm):
    p = form.params.p_crit
    v = form.interp @ u
    P = float(np.sum(form.qweights * np.abs(v) ** p))
    return v, P


def crit_integral(u, form: NonlocalForm) -> float:
    """sum_q W_q |Iu(x_q)|^p, the discrete int |u|^{2N/(N-2s)}."""
    return _crit(form.vector(u), form)[1]


def functional_N(u, form: NonlocalForm) -> float:
    """(int |u|^p)^{2/p}."""
    P = crit_integral(u, form)
    return P ** (2.0 / form.params.p_crit)


def functional_I(u, form: NonlocalForm) -> float:
    """a(u,u)/2 - (N-2s)/(2N) int |u|^p."""
    u = form.vector(u)
    return 0.5 * form.a(u) - crit_integral(u, form) / form.params.p_crit


def functional_R(u, form: NonlocalForm) -> float:
    u = form.vector(u)
    P = crit_integral(u, form)
    if not P > 0.0:
        raise ZeroFunctionError("Rayleigh quotient of the zero function")
    return form.a(u) / P ** (2.0 / form.params.p_crit)


def _grad_P(u, v, form):
    p = form.params.p_crit
    return form.interp.T @ (form.qweights * p * np.abs(v) ** (p - 2.0) * v) / form.h ** form.params.dim


def grad_N(u, form: NonlocalForm) -> np.ndarray:
    u = form.vector(u)
    v, P = _crit(u, form)
    if not P > 0.0:
        raise ZeroFunctionError("gradient of N at the zero function")
    p = form.params.p_crit
    return (2.0 / p) * P ** (2.0 / p - 1.0) * _grad_P(u, v, form)


def grad_R(u, form: NonlocalForm) -> np.ndarray:
    u = form.vector(u)
    v, P = _crit(u, form)
    if not P > 0.0:
        raise ZeroFunctionError("gradient of R at the zero function")
    p = form.params.p_crit
    Au = form.matrix @ u
    a = float(u @ Au)
    nn = P ** (2.0 / p)
    gN = (2.0 / p) * P ** (2.0 / p - 1.0) * _grad_P(u, v, form)
    return 2.0 * Au / form.h ** form.params.dim / nn - a * gN / nn ** 2


def grad_I(u, form: NonlocalForm) -> np.ndarray:
    u = form.vector(u)
    v, _ = _crit(u, form)
    return form.matrix @ u / form.h ** form.params.dim - _grad_P(u, v, form) / form.params.p_crit


def node_inner(f, g, form: NonlocalForm) -> float:
    return float(form.h ** form.params.dim * np.dot(f, g))


def node_norm(f, form: NonlocalForm) -> float:
    return math.sqrt(node_inner(f, f, form))


def tangent_project(u, form: NonlocalForm) -> tuple[np.ndarray, np.ndarray]:
    """Y = grad N / |grad N| and Z = grad R - <grad R, Y> Y."""
    gN = grad_N(u, form)
    nrm = node_norm(gN, form)
    if not nrm > 0.0:
        raise ZeroFunctionError("vanishing gradient of N")
    Y = gN / nrm
    gR = grad_R(u, form)
    Z = gR - node_inner(gR, Y, form) * Y
    return Y, Z


def project_to_constraint(u, form: NonlocalForm) -> np.ndarray:
    u = form.vector(u)
    P = crit_integral(u, form)
    if not P > 0.0:
        raise ZeroFunctionError("cannot normalize the zero function")
    return u / P ** (1.0 / form.params.p_crit)


def lambda_link(v, form: NonlocalForm) -> float:
    """lambda with lambda^{p-2} = a(v,v) / int |v|^p; grad I(lambda v) = (lambda/2) grad R(v) on M."""
    v = form.vector(v)
    p = form.params.p_crit
    return (form.a(v) / crit_integral(v, form)) ** (1.0 / (p - 2.0))


def weak_residual(u, form: NonlocalForm) -> tuple[float, float]:
    """max_i |a(w, phi_i) - int |w|^{p-2} w phi_i| for w = lambda u, and ||w||."""
    u = project_to_constraint(u, form)
    lam = lambda_link(u, form)
    w = lam * u
    v = form.interp @ w
    p = form.params.p_crit
    r = form.matrix @ w - form.interp.T @ (form.qweights * np.abs(v) ** (p - 2.0) * v)
    return float(np.max(np.abs(r))), math.sqrt(form.a(w))


def sign_split_check(u, form: NonlocalForm) -> tuple[float, float]:
    """a(u,u) against a(u+,u+) + a(u-,u-) + 4 sum_{i != j} w_ij u+_j u-_i."""
    u = form.vector(u)
    up, um = np.maximum(u, 0.0), np.maximum(-u, 0.0)
    lhs = form.a(u)
    w = form.weights
    cross = 0.0
    pos = np.nonzero(up)[0]
    neg = np.nonzero(um)[0]
    for i in neg:
        cross += float(np.dot(w[i, pos], up[pos])) * um[i]
    return lhs, form.a(up) + form.a(um) + 4.0 * cross


# ------------------------------------------------------------ identity checks

def _check(value: float, tol: float) -> dict:
    return {"value": float(value), "tol": float(tol), "ok": bool(value <= tol)}


def random_field(form: NonlocalForm, rng: np.random.Generator, signed: bool = False) -> np.ndarray:
    """A smooth random field on the interior nodes: a few random bumps."""
    x = form.node_points
    scale = form.domain.r_outer
    u = np.zeros(form.size)
    for _ in range(4):
        c = rng.uniform(-0.6, 0.6, form.params.dim) * scale
        w = rng.uniform(0.2, 0.5) * scale
        amp = rng.uniform(0.5, 1.5) * (rng.choice((-1.0, 1.0)) if signed else 1.0)
        u += amp * np.exp(-np.sum((x - c) ** 2, 1) / w ** 2)
    return u


def gradient_check(form: NonlocalForm, seed: int = 0, directions: int = 10,
                   step: float = 1e-4) -> dict:
    """Largest relative gap between grad_R, grad_N and central differences."""
    rng = np.random.default_rng(seed)
    u = random_field(form, rng)
    u = u / node_norm(u, form)
    worst = {"grad_R": 0.0, "grad_N": 0.0}
    gR, gN = grad_R(u, form), grad_N(u, form)
    for _ in range(directions):
        d = rng.standard_normal(form.size)
        d /= node_norm(d, form)
        for key, f, g in (("grad_R", functional_R, gR), ("grad_N", functional_N, gN)):
            fd = (f(u + step * d, form) - f(u - step * d, form)) / (2.0 * step)
            ex = node_inner(g, d, form)
            worst[key] = max(worst[key], abs(fd - ex) / max(abs(ex), 1e-300))
    return worst


def identity_suite(form: NonlocalForm, seed: int = 0, flow_steps: int = 20) -> dict:
    """Algebraic identities of the discrete scheme, each with its tolerance."""
    rng = np.random.default_rng(seed)
    out = {}
    u = project_to_constraint(random_field(form, rng), form)
    lam = lambda_link(u, form)
    lhs, rhs = grad_I(lam * u, form), 0.5 * lam * grad_R(u, form)
    out["lambda_link"] = _check(node_norm(lhs - rhs, form) / node_norm(rhs, form), 1e-10)
    Y, Z = tangent_project(u, form)
    gR = grad_R(u, form)
    out["z_orthogonality"] = _check(abs(node_inner(Z, Y, form)) / node_norm(gR, form), 1e-12)
    pyth = node_inner(gR, gR, form) - node_inner(Z, Z, form) - node_inner(gR, Y, form) ** 2
    out["pythagoras"] = _check(abs(pyth) / node_inner(gR, gR, form), 1e-12)
    w = random_field(form, rng, signed=True)
    a, b = sign_split_check(w, form)
    out["sign_split"] = _check(abs(a - b) / abs(a), 1e-10)
    st = flow_state(u, form)
    drift, rise = 0.0, 0.0
    for _ in range(flow_steps):
        try:
            nxt = flow_step(st, form)
        except StagnationError:
            break
        drift = max(drift, abs(functional_N(nxt.u, form) - 1.0))
        rise = max(rise, nxt.level - st.level)
        st = nxt
    out["constraint_drift"] = _check(drift, 1e-10)
    out["level_increase"] = _check(max(rise, 0.0), 0.0)
    return out


# ------------------------------------------------------------ flow

@dataclass
class FlowConfig:
    constraint_tol: float = 1e-10
    armijo: float = 1e-4
    initial_step: float = 1e-2
    grow: float = 2.0
    min_step: float = 1e-18
    grad_tol: float = 1e-6
    max_iter: int = 5000


@dataclass
class FlowState:
    u: np.ndarray
    level: float
    grad_norm: float
    step: float
    iterations: int = 0
    direction: np.ndarray | None = field(default=None, repr=False)


def flow_state(u, form: NonlocalForm, step: float = 1e-2, iterations: int = 0) -> FlowState:
    u = project_to_constraint(u, form)
    _, Z = tangent_project(u, form)
    return FlowState(u, functional_R(u, form), node_norm(Z, form), step, iterations, Z)


def flow_step(state: FlowState, form: NonlocalForm, cfg: FlowConfig | None = None) -> FlowState:
    """One backtracking step along -Z followed by renormalization onto N = 1.

    A step must lower the level strictly: once the Armijo decrease is below
    rounding, the search runs down to min_step and raises StagnationError.
    """
    cfg = cfg or FlowConfig()
    Z = state.direction
    if Z is None:
        _, Z = tangent_project(state.u, form)
    gn2 = node_inner(Z, Z, form)
    if gn2 == 0.0:
        return replace(state, grad_norm=0.0)
    t = state.step
    while t >= cfg.min_step:
        trial = project_to_constraint(state.u - t * Z, form)
        lev = functional_R(trial, form)
        if lev < state.level and lev <= state.level - cfg.armijo * t * gn2:
            _, Zn = tangent_project(trial, form)
            return FlowState(trial, lev, node_norm(Zn, form), t * cfg.grow,
                             state.iterations + 1, Zn)
        t *= 0.5
    raise StagnationError("line search underflow", replace(state, grad_norm=math.sqrt(gn2)))


def descend(u, form: NonlocalForm, cfg: FlowConfig | None = None, trace: list | None = None,
            max_iter: int | None = None, grad_tol: float | None = None) -> FlowState:
    """Run flow_step until |Z| <= grad_tol; stagnation ends the run quietly."""
    cfg = cfg or FlowConfig()
    tol = cfg.grad_tol if grad_tol is None else grad_tol
    limit = cfg.max_iter if max_iter is None else max_iter
    state = flow_state(u, form, cfg.initial_step)
    for _ in range(limit):
        if trace is not None:
            trace.append((state.level, crit_integral(state.u, form)))
        if state.grad_norm <= tol:
            break
        try:
            state = flow_step(state, form, cfg)
        except StagnationError as err:
            state = err.state
            break
    return state


# ------------------------------------------------------------ barycenter, degree

@lru_cache(maxsize=8)
def _grid_rule(domain: AnnulusDomain, resolution: int, order: int = 3):
    mask = make_grid(domain, resolution).mask
    return (mask,) + _element_rule(domain, resolution, mask, order)


def barycenter(u, where, K: float | None = None, tol: float = 1e-8) -> np.ndarray:
    """int_{B_K} x |u|^p for a field with critical integral 1.

    where is the NonlocalForm of u, or FracParams when u is a GridFunction;
    in the latter case only the element rule of the grid is built, so fine
    grids need no stiffness matrix. K defaults to sup |x| over Omega plus 1.
    """
    if isinstance(where, NonlocalForm):
        vec, E, W, x = where.vector(u), where.interp, where.qweights, where.qpoints
        dom, p = where.domain, where.params.p_crit
    else:
        if not isinstance(u, GridFunction):
            raise TypeError("a bare vector needs its form")
        dom, p = u.domain, where.p_crit
        mask, E, W, x = _grid_rule(dom, u.resolution)
        vec = u.values[mask]
    v = E @ vec
    P = float(np.sum(W * np.abs(v) ** p))
    if abs(P - 1.0) > tol:
        raise ConstraintError(f"critical integral {P} is not 1")
    if K is None:
        K = dom.r_outer + float(np.linalg.norm(dom.center)) + 1.0
    inside = np.linalg.norm(x, axis=1) <= K
    return (W * np.abs(v) ** p * inside) @ x


def grid_normalize(u: GridFunction, params: FracParams) -> GridFunction:
    """Pi(u) on the grid: critical integral 1 under the element rule."""
    mask, E, W, _ = _grid_rule(u.domain, u.resolution)
    P = float(np.sum(W * np.abs(E @ u.values[mask]) ** params.p_crit))
    if not P > 0.0:
        raise ZeroFunctionError("cannot normalize the zero function")
    return replace(u, values=u.values / P ** (1.0 / params.p_crit))


def boundary_barycenter_errors(eps_bar: float, zs, params: FracParams,
                               domain: AnnulusDomain, resolution: int) -> np.ndarray:
    """|beta(Pi(u_{eps_bar^2, eps_bar, z})) - z| for sampled family members on a grid."""
    g = make_grid(domain, resolution)
    pts = g.points()
    out = []
    for z in np.atleast_2d(np.asarray(zs, float)):
        t = TruncatedBubble(Cutoff(eps_bar ** 2), Bubble(eps_bar, tuple(z)))
        u = GridFunction(domain, resolution, eval_truncated(t, pts, params), g.mask)
        b = barycenter(grid_normalize(u, params), params)
        out.append(float(np.linalg.norm(b - z)))
    return np.array(out)


def winding_degree(loop: Sequence, tol: float = 1e-12) -> int:
    """Winding number of a closed planar polygon about the origin."""
    pts = np.asarray(loop, float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise UnsupportedDimensionError("winding number needs planar points")
    if np.any(np.linalg.norm(pts, axis=1) <= tol):
        raise DegeneracyError("loop passes through the origin")
    ang = np.arctan2(pts[:, 1], pts[:, 0])
    d = np.diff(np.append(ang, ang[0]))
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    return int(round(d.sum() / (2.0 * np.pi)))


def degree_1d(b_minus: float, b_plus: float) -> int:
    """Degree of a map [-1, 1] -> R about 0 from its endpoint signs."""
    if b_minus == 0.0 or b_plus == 0.0:
        raise DegeneracyError("endpoint maps to the origin")
    return int((np.sign(b_plus) - np.sign(b_minus)) // 2)


# ------------------------------------------------------------ sampling

def sample(field_fn, form: NonlocalForm) -> np.ndarray:
    """Nodal values of a callable on the interior nodes."""
    return np.asarray(field_fn(form.node_points), float)


def sampled_bubble(eps: float, z, form: NonlocalForm) -> np.ndarray:
    b = Bubble(eps, tuple(np.atleast_1d(z)))
    return eval_bubble(b, form.node_points, form.params)


def sampled_truncation(delta: float, eps: float, z, form: NonlocalForm) -> np.ndarray:
    t = TruncatedBubble(Cutoff(delta), Bubble(eps, tuple(np.atleast_1d(z))))
    return eval_truncated(t, form.node_points, form.params)


def ground_starts(domain: AnnulusDomain) -> list[np.ndarray]:
    """Bubble centers for the ground-level search: two radii, three angles."""
    c = np.array(domain.center, float)
    out = []
    for frac in (0.2, 0.45):
        r = domain.r_inner + frac * (domain.r_outer - domain.r_inner)
        for ang in (0.0, math.pi / 8, math.pi / 4):
            z = c.copy()
            z[0] += r * math.cos(ang)
            if domain.dim > 1:
                z[1] += r * math.sin(ang)
            out.append(z)
            if domain.dim == 1:
                break
    return out


def discrete_ground_level(form: NonlocalForm, eps: float | None = None,
                          cfg: FlowConfig | None = None) -> tuple[float, np.ndarray]:
    """S_h: smallest level reached by descent from sampled bubbles in the annulus.

    The discrete quotient has several local minima (a bubble of width ~h is
    pinned by the lattice), so several starts are tried.
    """
    cfg = cfg or FlowConfig()
    eps = 2.0 * form.h if eps is None else eps
    best = None
    for z in ground_starts(form.domain):
        st = descend(sampled_bubble(eps, z, form), form, cfg)
        if best is None or st.level < best.level:
            best = st
    return best.level, best.u


def grid_symmetries(form: NonlocalForm) -> list[np.ndarray]:
    """Interior-node permutations for the axis flips and swaps about the domain center.

    Only the identity is returned when the grid is not symmetric about the
    center (the center is off the lattice or the mask is not invariant).
    """
    n, res = form.params.dim, form.resolution
    ident = np.arange(form.size)
    m = res // 2
    # the center is node m along every axis by construction of the grid
    idx = _lattice_index(form.domain, res, form.mask)
    node_id = -np.ones(form.mask.shape, int)
    node_id[form.mask] = ident
    perms = []
    for axes in itertools.permutations(range(n)):
        for signs in itertools.product((1, -1), repeat=n):
            img = m + (idx[:, list(axes)] - m) * np.array(signs)
            if np.any(img < 0) or np.any(img >= res):
                return [ident]
            pid = node_id[tuple(img.T)]
            if np.any(pid < 0):
                return [ident]
            perms.append(pid)
    return perms


def symmetrize(u: np.ndarray, perms: Sequence[np.ndarray]) -> np.ndarray:
    return np.mean([u[p] for p in perms], axis=0)


# ------------------------------------------------------------ min-max

@dataclass
class MinMaxConfig:
    rings: int = 3
    angles: int = 16
    eps_ratio: float = 0.5
    band: float = 0.25
    steps_per_round: int = 25
    max_rounds: int = 400
    policy: str = "galerkin"
    flow: FlowConfig = field(default_factory=FlowConfig)


@dataclass
class MinMaxReport:
    level_c: float
    s_h: float
    window_ok: bool
    degree: int | None
    positivity_ok: bool
    residual: float
    residual_rel: float = 0.0
    window_upper: float = 0.0
    degree_final: int | None = None
    initial_max_level: float = 0.0
    boundary_max_level: float = 0.0
    max_member: int = 0
    member_count: int = 0
    grad_norm: float = 0.0
    scale: float = 1.0
    eps_bar_used: float = 0.0
    eps_used: float = 0.0
    min_member_level: float = 0.0
    rounds: int = 0
    iterations: int = 0
    resolution: int = 0
    interior_nodes: int = 0
    min_over_max: float = 0.0

    def __post_init__(self):
        if self.residual < 0:
            raise ValueError("residual must be nonnegative")

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def normalized_domain(domain: AnnulusDomain) -> tuple[AnnulusDomain, float]:
    """Map the annulus to the frame where the cutoff support B_4 fills the outer radius."""
    scale = domain.r_outer / 4.0
    half = [(hi - c) / scale for (lo, hi), c in zip(domain.bounding_box, domain.center)]
    box = tuple((-hw, hw) for hw in half)
    return AnnulusDomain((0.0,) * domain.dim, domain.r_inner / scale, 4.0, box), scale


def ball_mesh(dim: int, rings: int, angles: int) -> tuple[np.ndarray, np.ndarray]:
    """Polar mesh of B_1: center first, then rings outward; last ring is the boundary."""
    pts = [np.zeros(dim)]
    on_bdry = [False]
    for j in range(1, rings + 1):
        t = j / rings
        if dim == 1:
            ring = np.array([[t], [-t]])
        elif dim == 2:
            a = 2.0 * math.pi * np.arange(angles) / angles
            ring = t * np.stack([np.cos(a), np.sin(a)], -1)
        else:
            from .estimates import sphere_points
            ring = t * sphere_points(angles, dim)
        pts.extend(ring)
        on_bdry.extend([j == rings] * len(ring))
    return np.array(pts), np.array(on_bdry)


def family(eps_bar: float, eps: float, zs: np.ndarray, form: NonlocalForm) -> list[np.ndarray]:
    """f(z) = Pi(sampled u_{eps_bar^2, h(|z|), z})."""
    out = []
    for z in zs:
        t = min(1.0, float(np.linalg.norm(z)))
        e = h_interp(eps_bar, eps, t)
        # delta = eps_bar^2, kept inside the cutoff's admissible range; on the
        # grid the hole is imposed by the mask in any case
        u = sampled_truncation(min(eps_bar ** 2, 0.05), e, z, form)
        out.append(project_to_constraint(u, form))
    return out


def family_degree(members: Sequence[np.ndarray], zs: np.ndarray, on_bdry: np.ndarray,
                  form: NonlocalForm) -> int | None:
    dim = form.params.dim
    idx = np.nonzero(on_bdry)[0]
    bary = np.array([barycenter(members[i], form) for i in idx])
    if dim == 2:
        return winding_degree(bary)
    if dim == 1:
        plus = idx[np.argmax(zs[idx, 0])]
        minus = idx[np.argmin(zs[idx, 0])]
        return degree_1d(float(barycenter(members[minus], form)[0]),
                         float(barycenter(members[plus], form)[0]))
    return None


def minmax_solve(domain: AnnulusDomain, resolution: int, eps_bar: float,
                 params: FracParams, cfg: MinMaxConfig | None = None,
                 form: NonlocalForm | None = None) -> tuple[MinMaxReport, GridFunction]:
    """Flow the test family until its top member is stationary.

    Members within a band below the current maximum are moved (this plays
    the role of the cutoff in the deformation argument: low members are
    left alone); boundary members are frozen. The returned field lives on
    the normalized grid.
    """
    cfg = cfg or MinMaxConfig()
    ndom, scale = normalized_domain(domain)
    if form is None:
        form = assemble_form(ndom, resolution, params, cfg.policy)
    h = form.h
    # bubbles narrower than one cell are not representable on the grid
    eb = max(eps_bar, h)
    e = max(cfg.eps_ratio * eps_bar, h)
    e = min(e, eb)
    zs, on_bdry = ball_mesh(params.dim, cfg.rings, cfg.angles)
    members = family(eb, e, zs, form)
    degree = family_degree(members, zs, on_bdry, form)

    s_h, _ = discrete_ground_level(form, cfg=cfg.flow)
    # members centered at the symmetry center keep the grid symmetry exactly
    # in exact arithmetic; it is re-imposed after each step to stop rounding
    # from tipping them off the symmetric saddle
    perms = grid_symmetries(form)
    symmetric = [len(perms) > 1 and float(np.linalg.norm(z)) == 0.0 for z in zs]
    states = [flow_state(m, form, cfg.flow.initial_step) for m in members]
    init_levels = np.array([st.level for st in states])
    interior = np.nonzero(~on_bdry)[0]
    stalled = np.zeros(len(states), bool)

    def done(i):
        return stalled[i] or states[i].grad_norm <= cfg.flow.grad_tol

    rounds = 0
    iters = 0
    while rounds < cfg.max_rounds:
        lev = np.array([states[i].level for i in interior])
        top = interior[int(np.argmax(lev))]  # argmax keeps the lowest index on ties
        c = states[top].level
        if done(top):
            break
        rounds += 1
        band = cfg.band * max(c - s_h, 1e-12)
        for i in interior:
            if states[i].level < c - band:
                continue
            for _ in range(cfg.steps_per_round):
                if done(i):
                    break
                try:
                    st = flow_step(states[i], form, cfg.flow)
                except StagnationError as err:
                    states[i] = err.state
                    stalled[i] = True
                    break
                if symmetric[i]:
                    st = flow_state(symmetrize(st.u, perms), form, st.step, st.iterations)
                states[i] = st
                iters += 1
    lev = np.array([states[i].level for i in interior])
    top = interior[int(np.argmax(lev))]
    u = states[top].u
    c = states[top].level
    res, nrm = weak_residual(u, form)
    final_members = [st.u for st in states]
    degree_final = family_degree(final_members, zs, on_bdry, form)
    umax, umin = float(np.max(u)), float(np.min(u))
    if umax < 0:  # a flowed member may have flipped sign; the level is even in u
        u, umax, umin = -u, -umin, -umax
    upper = params.window_factor * s_h
    report = MinMaxReport(
        level_c=c, s_h=s_h, window_ok=bool(s_h < c < upper), degree=degree,
        positivity_ok=bool(umin >= -1e-8 * umax), residual=res,
        residual_rel=res / nrm if nrm > 0 else math.inf, window_upper=upper,
        degree_final=degree_final, initial_max_level=float(init_levels.max()),
        boundary_max_level=float(init_levels[on_bdry].max()), max_member=int(top),
        member_count=len(states), grad_norm=states[top].grad_norm, scale=scale,
        eps_bar_used=eb, eps_used=e,
        min_member_level=float(min(st.level for st in states)), rounds=rounds,
        iterations=iters, resolution=resolution, interior_nodes=form.size,
        min_over_max=umin / umax if umax > 0 else 0.0)
    return report, form.grid(u)


# ------------------------------------------------------------ field dump

def write_field(path, u: GridFunction, params: FracParams) -> None:
    bbox = ",".join(f"{lo:.17g}..{hi:.17g}" for lo, hi in _node_bbox(u))
    lines = [f"FRACORON-FIELD v1 N={params.dim} s={params.s:.17g} res={u.resolution} bbox={bbox}"]
    lines.extend(f"{v:.17g}" for v in u.values.ravel(order="C"))
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as err:
        raise OSError(f"cannot write field dump to {path}: {err}") from err


def _node_bbox(u: GridFunction):
    pts = u.points().reshape(-1, u.domain.dim)
    return list(zip(pts.min(0), pts.max(0)))


def read_field(path) -> tuple[dict, np.ndarray]:
    with open(path) as fh:
        head = fh.readline().split()
        vals = np.array([float(x) for x in fh.read().split()])
    if head[:2] != ["FRACORON-FIELD", "v1"]:
        raise ValueError("not a field dump")
    meta = dict(kv.split("=", 1) for kv in head[2:])
    n, res = int(meta["N"]), int(meta["res"])
    return meta, vals.reshape((res,) * n)
