"""Continuum Gagliardo energies and L^p integrals of closed-form fields.

The double integral is written in (x, w = y - x) coordinates and symmetrized
with a weight chi(x, y) = g(x) / (g(x) + g(y)), where g peaks at the field's
concentration points. Each pair is therefore integrated mostly from the
viewpoint that sits closer to a concentration point, where the polar meshes
are fine. Around the diagonal a Taylor ball of radius near_radius * scale(x)
is integrated analytically from the gradient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .core import (CapabilityError, FracParams, QuadratureConfig, QuadratureError,
                   ZeroFunctionError, sphere_area)

# exponents of the partition-of-unity and symmetrization weights
_PU_POWER = 6.0
_CHI_POWER = 6.0
_CHUNK = 250_000
# beyond this multiple of the support radius chi(x, y) < 1e-8 for y in the support
_CHI_MARGIN = 32.0


@dataclass(frozen=True)
class Feature:
    """A concentration point of a field: center, length scale, radial breaks."""

    center: tuple
    scale: float
    radii: tuple = ()


@dataclass(frozen=True)
class FieldFn:
    """A scalar field on R^N given by callables on arrays of shape (..., N).

    support_radius bounds the region (about support_center) outside which the
    field is zero, or, when decay is set, decays like |x|^-decay.
    """

    dim: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    support_radius: float = 1.0
    support_center: tuple | None = None
    decay: float | None = None
    features: tuple = ()
    radial: bool = False
    lipschitz: float | None = None
    is_zero: bool = False

    def __post_init__(self):
        if self.support_center is None:
            object.__setattr__(self, "support_center", (0.0,) * self.dim)
        if not self.features:
            object.__setattr__(self, "features", (
                Feature(tuple(self.support_center), 0.25 * self.support_radius),))

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(np.asarray(x, float))

    def grad(self, x) -> np.ndarray:
        if self.gradient is None:
            raise CapabilityError("field has no gradient")
        return self.gradient(np.asarray(x, float))

    @staticmethod
    def zero(dim: int) -> "FieldFn":
        return FieldFn(dim, lambda x: np.zeros(x.shape[:-1]),
                       lambda x: np.zeros(x.shape), is_zero=True, radial=True)

    def scaled(self, c: float) -> "FieldFn":
        f, g = self.evaluator, self.gradient
        grad = None if g is None else (lambda x: c * g(x))
        lip = None if self.lipschitz is None else abs(c) * self.lipschitz
        return replace(self, evaluator=lambda x: c * f(x), gradient=grad,
                       lipschitz=lip, is_zero=self.is_zero or c == 0.0)

    def __mul__(self, c: float) -> "FieldFn":
        return self.scaled(float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "FieldFn":
        return self.scaled(-1.0)

    def __add__(self, other: "FieldFn") -> "FieldFn":
        return _combine(self, other, 1.0)

    def __sub__(self, other: "FieldFn") -> "FieldFn":
        return _combine(self, other, -1.0)


def _combine(a: FieldFn, b: FieldFn, sign: float) -> FieldFn:
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    fa, fb = a.evaluator, b.evaluator
    grad = None
    if a.gradient is not None and b.gradient is not None:
        ga, gb = a.gradient, b.gradient
        grad = lambda x: ga(x) + sign * gb(x)
    lip = None
    if a.lipschitz is not None and b.lipschitz is not None:
        lip = a.lipschitz + b.lipschitz
    feats = merge_features(a.features + b.features)
    ca, cb = np.asarray(a.support_center), np.asarray(b.support_center)
    radius = max(a.support_radius + np.linalg.norm(ca - cb), b.support_radius)
    decays = [d for d in (a.decay, b.decay) if d is not None]
    return FieldFn(
        a.dim, lambda x: fa(x) + sign * fb(x), grad,
        support_radius=float(radius), support_center=tuple(cb),
        decay=min(decays) if decays else None, features=feats,
        radial=a.radial and b.radial and len(feats) == 1, lipschitz=lip,
        is_zero=a.is_zero and b.is_zero)


def merge_features(feats: Sequence[Feature]) -> tuple:
    out: list[Feature] = []
    for f in feats:
        for i, g in enumerate(out):
            if np.linalg.norm(np.subtract(f.center, g.center)) <= 1e-12 * (1 + g.scale):
                out[i] = Feature(g.center, min(f.scale, g.scale),
                                 tuple(sorted(set(g.radii) | set(f.radii))))
                break
        else:
            out.append(Feature(tuple(float(c) for c in f.center), float(f.scale),
                               tuple(sorted(f.radii))))
    return tuple(out)


# ---------------------------------------------------------------- rules

def _gauss01(n: int):
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def sphere_rule(dim: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions and weights on S^{dim-1}; weights sum to its area."""
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    if dim == 2:
        th = 2.0 * math.pi * (np.arange(2 * n) + 0.5) / (2 * n)
        return np.stack([np.cos(th), np.sin(th)], -1), np.full(2 * n, math.pi / n)
    if dim == 3:
        ct, wt = leggauss(n)
        ph = 2.0 * math.pi * (np.arange(2 * n) + 0.5) / (2 * n)
        st = np.sqrt(1.0 - ct ** 2)
        d = np.stack([np.outer(st, np.cos(ph)), np.outer(st, np.sin(ph)),
                      np.outer(ct, np.ones_like(ph))], -1).reshape(-1, 3)
        return d, np.outer(wt, np.full(2 * n, math.pi / n)).ravel()
    raise ValueError("sphere rules implemented for dim <= 3")


def _radial_breaks(scale: float, outer: float, radii: Sequence[float]) -> np.ndarray:
    # dyadic shells from scale/4 outward, plus feature radii; the last shell is
    # [outer/2, outer] so shell-ratio tail extrapolation applies
    br = [0.0]
    r = 0.25 * scale
    while r < 0.5 * outer:
        br.append(r)
        r *= 2.0
    br.append(0.5 * outer)
    br.append(outer)
    br.extend(x for x in radii if 0.0 < x < 0.5 * outer)
    br = np.unique(np.asarray(br))
    keep = [0]
    for i in range(1, len(br)):
        if br[i] - br[keep[-1]] > 1e-9 * br[i]:
            keep.append(i)
    return br[keep]


@dataclass
class _Mesh:
    x: np.ndarray
    w: np.ndarray
    last: np.ndarray = field(default=None)


class _Geometry:
    """Concentration weights and meshes shared by the energy and L^p routines."""

    def __init__(self, fields: Sequence[FieldFn], q: QuadratureConfig, level: int):
        self.dim = fields[0].dim
        self.q = q
        self.level = level
        self.feats = merge_features(sum((f.features for f in fields), ()))
        self.centers = np.array([f.center for f in self.feats], float)
        self.scales = np.array([f.scale for f in self.feats], float)
        self.radial = all(f.radial for f in fields) and len(self.feats) == 1
        self.decay = min((f.decay for f in fields if f.decay is not None), default=None)
        compact = [f for f in fields if f.decay is None and not f.is_zero]
        self.extent = 0.0
        for f in fields:
            if f.is_zero:
                continue
            c = np.asarray(f.support_center)
            self.extent = max(self.extent, f.support_radius + float(np.max(
                np.linalg.norm(self.centers - c, axis=-1))))
        if self.decay is not None:
            ref = float(np.max(np.linalg.norm(self.centers, axis=-1) + self.scales))
            self.outer = q.tail_radius * max(ref, self.extent if not compact else 0.0)
            self.outer = max(self.outer, 4.0 * self.extent)
        else:
            self.outer = self.extent
        self.order = q.near_refinement + 2 * level
        self.nang = int(round(q.far_subdivisions * 1.5 ** level))

    # partition of unity and local length scale
    def _g(self, x: np.ndarray, power: float) -> np.ndarray:
        d2 = np.sum((x[..., None, :] - self.centers) ** 2, -1)
        return (self.scales ** 2 + d2) ** (-0.5 * power)

    def _ownership(self, x: np.ndarray) -> np.ndarray:
        # like _g, plus a term per remote break circle (R well beyond the
        # feature scale) so the feature owns a band around it, where its
        # polar mesh is aligned with the break
        g = self._g(x, _PU_POWER)
        for k, f in enumerate(self.feats):
            remote = [R for R in f.radii if R > 4.0 * f.scale]
            if not remote:
                continue
            r2 = np.sum((x - self.centers[k]) ** 2, -1)
            for R in remote:
                # (r^2 - R^2) / 2R ~ r - R near the circle and is smooth at the center
                g[..., k] += ((0.25 * R) ** 2 + ((r2 - R * R) / (2 * R)) ** 2) ** (-0.5 * _PU_POWER)
        return g

    def local_scale(self, x: np.ndarray) -> np.ndarray:
        return np.sum(self._g(x, _PU_POWER), -1) ** (-1.0 / _PU_POWER)

    def chi_weight(self, x: np.ndarray) -> np.ndarray:
        # normalized so the largest concentration is O(1)
        return np.sum(self._g(x, _CHI_POWER) * self.scales ** _CHI_POWER, -1)

    def x_mesh(self, margin: float = 1.0) -> _Mesh:
        xg, wg = _gauss01(self.order)
        xs, ws, last = [], [], []
        if self.radial:
            dirs, dw = np.eye(self.dim)[:1], np.array([sphere_area(self.dim)])
        else:
            dirs, dw = sphere_rule(self.dim, self.nang)
        for k, f in enumerate(self.feats):
            # the ball of radius extent about any feature covers the support
            # (energies pass a margin: points outside the support still carry
            # the chi-share of pairs reaching into it)
            reach = self.extent * margin if self.decay is None else self.outer
            br = _radial_breaks(f.scale, reach, f.radii)
            a, b = br[:-1, None], br[1:, None]
            r = (a + (b - a) * xg).ravel()
            wr = ((b - a) * wg).ravel() * r ** (self.dim - 1)
            is_last = np.repeat(np.arange(len(a)) == len(a) - 1, len(xg))
            pts = np.asarray(f.center) + r[:, None, None] * dirs[None]
            wts = wr[:, None] * dw[None]
            pts = pts.reshape(-1, self.dim)
            wts = wts.ravel()
            lst = np.repeat(is_last, len(dw))
            if len(self.feats) > 1:
                g = self._ownership(pts)
                psi = g[:, k] / np.sum(g, -1)
                keep = psi > 1e-14
                pts, wts, lst = pts[keep], (wts * psi)[keep], lst[keep]
            xs.append(pts)
            ws.append(wts)
            last.append(lst)
        return _Mesh(np.concatenate(xs), np.concatenate(ws), np.concatenate(last))


def _tail_ratio(geo: _Geometry, kind: str, p: float, s: float) -> float:
    d = geo.dim
    if kind == "energy":
        return 2.0 ** (d - 2.0 * s - 2.0 * geo.decay)
    return 2.0 ** (d - p * geo.decay)


def _energy_level(u: FieldFn, v: FieldFn, params: FracParams, q: QuadratureConfig,
                  level: int) -> float:
    n, s = params.dim, params.s
    same = u is v
    geo = _Geometry([u] if same else [u, v], q, level)
    mesh = geo.x_mesh(margin=_CHI_MARGIN)
    dirs, dw = sphere_rule(n, geo.nang)
    xg, wg = _gauss01(geo.order)
    area = sphere_area(n)
    use_grad = u.gradient is not None and v.gradient is not None
    if not use_grad:
        lips = (u.lipschitz, v.lipschitz)
        if None in lips:
            raise CapabilityError("gagliardo quadrature needs a gradient or a Lipschitz constant")

    total_main = 0.0
    total_last = 0.0
    npts = len(mesh.x)
    # number of radial points per x is fixed within a chunk
    step = max(1, _CHUNK // (len(dirs) * geo.order * 40))
    for start in range(0, npts, step):
        x = mesh.x[start:start + step]
        wx = mesh.w[start:start + step]
        lst = mesh.last[start:start + step]
        lam = geo.local_scale(x)
        ux = u.evaluator(x)
        vx = ux if same else v.evaluator(x)
        r0 = q.near_radius * lam
        if use_grad:
            gu = u.gradient(x)
            gv = gu if same else v.gradient(x)
            near = np.sum(gu * gv, -1) * area * r0 ** (2.0 - 2.0 * s) / (n * (2.0 - 2.0 * s))
        else:
            # drop the Taylor ball and shrink it until the Lipschitz bound is negligible
            r0 = r0 * 1e-3
            near = np.zeros(len(x))
        dist = np.linalg.norm(x - np.asarray(u.support_center), axis=-1)
        if geo.decay is None:
            rfar = 32.0 * (dist + geo.extent)
        else:
            rfar = q.tail_radius * (dist + lam) + 32.0 * geo.extent
        npan = int(np.ceil(np.max(np.log2(rfar / r0))))
        ratio = (rfar / r0) ** (1.0 / npan)
        # panels [r0 ratio^j, r0 ratio^{j+1}] with Gauss points
        j = np.arange(npan)
        a = r0[:, None] * ratio[:, None] ** j
        b = a * ratio[:, None]
        rr = (a[..., None] + (b - a)[..., None] * xg).reshape(len(x), -1)
        wr = ((b - a)[..., None] * wg).reshape(len(x), -1) * rr ** (-1.0 - 2.0 * s)
        y = x[:, None, None, :] + rr[:, :, None, None] * dirs[None, None]
        uy = u.evaluator(y)
        du = uy - ux[:, None, None]
        dv = du if same else v.evaluator(y) - vx[:, None, None]
        gx = geo.chi_weight(x)
        gy = geo.chi_weight(y)
        chi = gx[:, None, None] / (gx[:, None, None] + gy)
        body = 2.0 * np.einsum("ij,ijk,k->i", wr, chi * du * dv, dw)
        tail = 2.0 * ux * vx * area * rfar ** (-2.0 * s) / (2.0 * s)
        if geo.decay is not None:
            # beyond rfar the fields are not negligible for slow decay; their
            # spherical means there are continued as rho^-decay
            yf = x[:, None, :] + rfar[:, None, None] * dirs[None]
            uf = u.evaluator(yf)
            vf = uf if same else v.evaluator(yf)
            ubar, vbar, uvbar = uf @ dw, vf @ dw, (uf * vf) @ dw
            dcy = geo.decay
            tail += 2.0 * rfar ** (-2.0 * s) * (-(ux * vbar + vx * ubar) / (dcy + 2.0 * s)
                                                 + uvbar / (2.0 * dcy + 2.0 * s))
        contrib = wx * (near + body + tail)
        total_main += float(np.sum(contrib))
        total_last += float(np.sum(contrib[lst]))
    if geo.decay is not None:
        rho = _tail_ratio(geo, "energy", 0.0, s)
        if rho < 1.0:
            total_main += total_last * rho / (1.0 - rho)
    return total_main


def _refine(fn, q: QuadratureConfig, what: str) -> float:
    prev = None
    hist = []
    for level in range(q.max_level + 1):
        val = fn(level)
        if prev is not None:
            diff = abs(val - prev)
            hist.append(diff)
            if diff <= q.rel_tol * abs(val) or val == prev:
                return val
        prev = val
    raise QuadratureError(f"{what}: tolerance {q.rel_tol} not reached; successive differences {hist}")


def inner(u: FieldFn, v: FieldFn, params: FracParams, q: QuadratureConfig | None = None) -> float:
    """Bilinear Gagliardo form: double integral of (u(x)-u(y))(v(x)-v(y))/|x-y|^{N+2s}."""
    q = q or QuadratureConfig()
    if u.is_zero or v.is_zero:
        return 0.0
    return _refine(lambda lv: _energy_level(u, v, params, q, lv), q, "inner")


def gagliardo_sq(u: FieldFn, params: FracParams, q: QuadratureConfig | None = None) -> float:
    """Squared Gagliardo seminorm of u."""
    q = q or QuadratureConfig()
    if u.is_zero:
        return 0.0
    return _refine(lambda lv: _energy_level(u, u, params, q, lv), q, "gagliardo_sq")


def _lp_level(u: FieldFn, p: float, params: FracParams, q: QuadratureConfig, level: int) -> float:
    geo = _Geometry([u], q, level)
    mesh = geo.x_mesh()
    vals = np.abs(u.evaluator(mesh.x)) ** p * mesh.w
    total = float(np.sum(vals))
    if geo.decay is not None:
        rho = _tail_ratio(geo, "lp", p, params.s)
        if rho >= 1.0:
            raise QuadratureError("L^p integral diverges for this decay rate")
        total += float(np.sum(vals[mesh.last])) * rho / (1.0 - rho)
    return total


def lp_integral(u: FieldFn, p: float, params: FracParams, q: QuadratureConfig | None = None) -> float:
    """Integral of |u|^p over R^N."""
    if p < 1.0:
        raise ValueError("p must be at least 1")
    q = q or QuadratureConfig()
    if u.is_zero:
        return 0.0
    return _refine(lambda lv: _lp_level(u, p, params, q, lv), q, "lp_integral")


def critical_norm(u: FieldFn, params: FracParams, q: QuadratureConfig | None = None) -> float:
    p = params.p_crit
    return lp_integral(u, p, params, q) ** (1.0 / p)


def rayleigh(u: FieldFn, params: FracParams, q: QuadratureConfig | None = None) -> float:
    """Gagliardo energy over the squared critical norm."""
    q = q or QuadratureConfig()
    lp = lp_integral(u, params.p_crit, params, q)
    if not lp > 0.0:
        raise ZeroFunctionError("rayleigh quotient of the zero function")
    return gagliardo_sq(u, params, q) / lp ** (2.0 / params.p_crit)


def sobolev_constant(params: FracParams) -> float:
    """Closed-form best constant for the Gagliardo energy.

    The sharp constant for the H^s seminorm defined through the Fourier
    symbol |xi|^{2s}, converted by the factor 2/C(N,s) that relates it to
    the double integral.
    """
    from scipy.special import gamma
    from .core import c_ns_closed_form
    n, s = params.dim, params.s
    fourier = (2.0 ** (2 * s) * math.pi ** s * gamma(0.5 * n + s) / gamma(0.5 * n - s)
               * (gamma(0.5 * n) / gamma(n)) ** (2 * s / n))
    return 2.0 / c_ns_closed_form(params) * fourier
