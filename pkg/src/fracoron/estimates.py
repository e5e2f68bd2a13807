"""Truncation estimates for bubbles and the Rayleigh gap of the test family.

Energy excesses are evaluated as a single bilinear quantity,
<u - U, u + U>, rather than as a difference of two large energies.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .bubbles import (Bubble, Cutoff, TruncatedBubble, _smoothstep, bubble_field,
                      normalize, truncated_field)
from .core import FitDomainError, FracParams, QuadratureConfig
from .quadrature import Feature, FieldFn, inner, lp_integral, rayleigh

DEFAULT_VARPI = 0.95


@dataclass
class ScalingReport:
    sweep: list
    fitted_slope: float
    r_squared: float
    baseline: float = 0.0
    intercept: float = 0.0
    fitted_points: list = field(default_factory=list)

    def __post_init__(self):
        if any(x <= 0 for x, _ in self.sweep):
            raise ValueError("sweep parameter values must be positive")
        if not 0.0 <= self.r_squared <= 1.0 + 1e-12:
            raise ValueError("r_squared out of range")

    def as_dict(self) -> dict:
        return {"fitted_slope": self.fitted_slope, "r_squared": self.r_squared,
                "baseline": self.baseline, "intercept": self.intercept,
                "sweep": [[x, y] for x, y in self.sweep],
                "fitted_points": [[x, y] for x, y in self.fitted_points]}


def worker_count() -> int:
    raw = os.environ.get("FRACORON_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def map_ordered(fn: Callable, items: Iterable) -> list:
    """Evaluate fn over items, possibly concurrently; results keep input order."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# ------------------------------------------------------------ quantities

def _split_fields(t: TruncatedBubble, params: FracParams) -> tuple[FieldFn, FieldFn]:
    """(u - U, u + U) for u the truncation of U."""
    u = truncated_field(t, params)
    U = bubble_field(t.bubble, params)
    return u - U, u + U


def energy_excess(t: TruncatedBubble, params: FracParams, q: QuadratureConfig | None = None) -> float:
    """||u_{delta,eps,z}||^2 - ||U_{eps,z}||^2, may be negative."""
    d, s = _split_fields(t, params)
    return inner(d, s, params, q)


def _outer_only_field(b: Bubble, params: FracParams) -> FieldFn:
    # the delta -> 0 limit of the truncation: only the ramp on [3, 4] remains
    n = params.dim
    U = bubble_field(b, params)

    def phi(x):
        return _smoothstep(4.0 - np.linalg.norm(x, axis=-1))

    def dphi(x):
        r = np.linalg.norm(x, axis=-1)
        t = 4.0 - r
        slope = np.where((t > 0) & (t < 1), -30.0 * t ** 2 * (1 - t) ** 2, 0.0)
        return (slope / np.where(r > 0, r, 1.0))[..., None] * x

    feats = U.features + (Feature((0.0,) * n, 1.0, (3.0, 4.0)),)
    from .quadrature import merge_features
    feats = merge_features(feats)
    return FieldFn(n, lambda x: phi(x) * U.evaluator(x),
                   lambda x: dphi(x)[...] * U.evaluator(x)[..., None] + phi(x)[..., None] * U.gradient(x),
                   support_radius=4.0, features=feats, radial=len(feats) == 1)


def excess_plateau(b: Bubble, params: FracParams, q: QuadratureConfig | None = None) -> float:
    """Limit of the energy excess as delta -> 0: truncation at infinity only."""
    u = _outer_only_field(b, params)
    U = bubble_field(b, params)
    return inner(u - U, u + U, params, q)


def norm_deficit(t: TruncatedBubble, params: FracParams, q: QuadratureConfig | None = None) -> float:
    """int U^p - int u^p at the critical p, written as int U^p (1 - phi^p) >= 0."""
    p = params.p_crit
    U = bubble_field(t.bubble, params)
    c = t.cutoff

    def w(x):
        phi = c.radial_value(np.linalg.norm(x, axis=-1))
        return U.evaluator(x) * np.clip(1.0 - phi ** p, 0.0, None) ** (1.0 / p)

    feats = truncated_field(t, params).features
    f = FieldFn(params.dim, w, support_radius=U.support_radius, support_center=U.support_center,
                decay=U.decay, features=feats, radial=len(feats) == 1)
    return lp_integral(f, p, params, q)


# ------------------------------------------------------------ fits

def fit_scaling(sweep: Sequence, subtract_baseline: bool = False,
                baseline: float | None = None) -> ScalingReport:
    """Least-squares slope of log y against log x.

    With subtract_baseline and no explicit baseline, the value at the
    smallest x is used as the baseline and that point leaves the fit.
    """
    pts = sorted((float(x), float(y)) for x, y in sweep)
    if len(pts) < 4:
        raise FitDomainError("need at least 4 sweep points")
    base = 0.0
    fit = pts
    if subtract_baseline:
        if baseline is None:
            base = pts[0][1]
            fit = pts[1:]
        else:
            base = float(baseline)
    xs = np.array([x for x, _ in fit])
    ys = np.array([y for _, y in fit]) - base
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise FitDomainError("nonpositive values after baseline subtraction")
    lx, ly = np.log(xs), np.log(ys)
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ np.array([slope, icpt])
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingReport(sweep=pts, fitted_slope=float(slope), r_squared=float(min(max(r2, 0.0), 1.0)),
                         baseline=base, intercept=float(icpt),
                         fitted_points=[(float(x), float(y)) for x, y in zip(xs, ys)])


def delta_sweep(eps: float, count: int) -> list[float]:
    """eps * {1/2^count, ..., 1/2}."""
    return [eps * 2.0 ** (-k) for k in range(count, 0, -1)]


def excess_sweep(eps: float, z, params: FracParams, count: int = 4,
                 q: QuadratureConfig | None = None) -> list[tuple[float, float]]:
    def one(delta):
        t = TruncatedBubble(Cutoff(delta), Bubble(eps, z))
        return delta, energy_excess(t, params, q)
    return map_ordered(one, delta_sweep(eps, count))


def deficit_sweep(eps: float, z, params: FracParams, count: int = 4,
                  q: QuadratureConfig | None = None) -> list[tuple[float, float]]:
    def one(delta):
        t = TruncatedBubble(Cutoff(delta), Bubble(eps, z))
        return delta, norm_deficit(t, params, q)
    return map_ordered(one, delta_sweep(eps, count))


def model_ratio_spread(sweep: Sequence, model: Callable[[float], float]) -> float:
    """max/median of y / model(x); bounded spread means the one-sided bound holds."""
    r = np.array([y / model(x) for x, y in sweep])
    med = float(np.median(np.abs(r)))
    return float(np.max(r) / med) if med > 0 else math.inf


# ------------------------------------------------------------ Rayleigh gap

@lru_cache(maxsize=None)
def _reference_s(dim: int, s: float, rel_tol: float) -> float:
    p = FracParams(dim, s)
    return rayleigh(bubble_field(Bubble(1.0, (0.0,) * dim), p), p, QuadratureConfig(rel_tol=rel_tol))


def reference_s(params: FracParams, rel_tol: float = 1e-6) -> float:
    """S computed as the quotient of U_{1,0} at tight tolerance."""
    return _reference_s(params.dim, params.s, rel_tol)


def family_member(eps_bar: float, z, params: FracParams) -> TruncatedBubble:
    """u_{delta, eps_bar, z} with delta = eps_bar^2."""
    return TruncatedBubble(Cutoff(eps_bar ** 2), Bubble(eps_bar, z))


def ball_samples(count: int, dim: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy points in B_1 (Halton radii/angles), with the boundary ring last."""
    from scipy.stats import qmc
    n_ring = max(1, count // 4) if count >= 4 else 0
    n_in = count - n_ring
    pts = []
    if n_in:
        h = qmc.Halton(d=dim, scramble=True, seed=seed).random(n_in)
        if dim == 1:
            pts.append(2.0 * h - 1.0)
        else:
            g = np.random.default_rng(seed).standard_normal((n_in, dim))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            radius = h[:, :1] ** (1.0 / dim)
            if dim == 2:
                ang = 2 * np.pi * h[:, 1]
                g = np.stack([np.cos(ang), np.sin(ang)], -1)
            pts.append(radius * g)
    if n_ring:
        pts.append(sphere_points(n_ring, dim))
    return np.concatenate(pts)[:count]


def sphere_points(count: int, dim: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]] * ((count + 1) // 2))[:count]
    if dim == 2:
        a = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(a), np.sin(a)], -1)
    # Fibonacci sphere
    k = np.arange(count) + 0.5
    ph = np.arccos(1 - 2 * k / count)
    th = np.pi * (1 + 5 ** 0.5) * k
    return np.stack([np.cos(th) * np.sin(ph), np.sin(th) * np.sin(ph), np.cos(ph)], -1)


@dataclass
class GapResult:
    max_quotient: float
    passes: bool
    threshold: float
    reference_s: float
    quotients: list


def rayleigh_gap(eps_bar: float, z_samples, params: FracParams,
                 q: QuadratureConfig | None = None, varpi: float = DEFAULT_VARPI,
                 s_ref: float | None = None) -> GapResult:
    """Max of R(Pi(u_{eps_bar^2, eps_bar, z})) over samples against varpi 2^{2s/N} S."""
    if not 2.0 ** (-2.0 * params.s / params.dim) < varpi < 1.0:
        raise ValueError("varpi must lie in (2^{-2s/N}, 1)")
    s_ref = reference_s(params) if s_ref is None else s_ref

    def one(z):
        u = truncated_field(family_member(eps_bar, z, params), params)
        return rayleigh(normalize(u, params, q), params, q)

    vals = map_ordered(one, [tuple(np.atleast_1d(z)) for z in z_samples])
    thr = varpi * params.window_factor * s_ref
    mx = float(max(vals))
    return GapResult(mx, mx <= thr, thr, s_ref, [float(v) for v in vals])


def select_eps_bar(z_samples, params: FracParams, q: QuadratureConfig | None = None,
                   varpi: float = DEFAULT_VARPI, start: float = 0.05, levels: int = 4):
    """Largest eps_bar in the dyadic sweep start/2^k for which the gap test passes."""
    trail = []
    for k in range(levels):
        e = start * 2.0 ** (-k)
        res = rayleigh_gap(e, z_samples, params, q, varpi)
        trail.append((e, res.max_quotient, res.passes))
        if res.passes:
            return e, trail
    return None, trail
