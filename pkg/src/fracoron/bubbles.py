"""Bubbles U_{eps,z}, the cutoff phi_delta and truncated bubbles, as FieldFn objects."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FracParams, QuadratureConfig, ZeroFunctionError
from .quadrature import Feature, FieldFn, lp_integral


def _as_point(z, dim: int) -> np.ndarray:
    z = np.zeros(dim) if z is None else np.atleast_1d(np.asarray(z, float))
    if z.shape != (dim,):
        raise ValueError(f"expected a point in R^{dim}, got shape {z.shape}")
    return z


@dataclass(frozen=True)
class Bubble:
    eps: float
    z: tuple

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")
        object.__setattr__(self, "z", tuple(float(v) for v in np.atleast_1d(self.z)))


def eval_bubble(b: Bubble, x, params: FracParams) -> np.ndarray:
    """(eps / (eps^2 + |x - z|^2))^{(N-2s)/2}."""
    x = np.asarray(x, float)
    d2 = np.sum((x - np.asarray(b.z)) ** 2, -1)
    return (b.eps / (b.eps ** 2 + d2)) ** params.bubble_power


def eval_bubble_grad(b: Bubble, x, params: FracParams) -> np.ndarray:
    x = np.asarray(x, float)
    dx = x - np.asarray(b.z)
    d2 = np.sum(dx ** 2, -1)
    u = (b.eps / (b.eps ** 2 + d2)) ** params.bubble_power
    return (-(params.dim - 2.0 * params.s) * u / (b.eps ** 2 + d2))[..., None] * dx


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def _smoothstep_slope(t):
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 30.0 * t ** 2 * (1.0 - t) ** 2, 0.0)


@dataclass(frozen=True)
class Cutoff:
    """Radial cutoff: 0 on |x| <= 2 delta and |x| >= 4, 1 on [4 delta, 3].

    Both transitions are quintic smoothstep ramps (C^2). The inner ramp has
    slope at most 15/(16 delta), the outer one at most 15/8.
    """

    delta: float
    profile: str = "quintic"

    def __post_init__(self):
        if not 0.0 < self.delta <= 0.05:
            raise ValueError("delta must lie in (0, 1/20]")
        if self.profile != "quintic":
            raise ValueError(f"unknown cutoff profile {self.profile!r}")
        _check_cutoff(self)

    def radial_value(self, r):
        d = self.delta
        r = np.asarray(r, float)
        inner = _smoothstep((r - 2.0 * d) / (2.0 * d))
        outer = _smoothstep(4.0 - r)
        return np.where(r < 3.0, inner, outer)

    def radial_slope(self, r):
        d = self.delta
        r = np.asarray(r, float)
        inner = _smoothstep_slope((r - 2.0 * d) / (2.0 * d)) / (2.0 * d)
        outer = -_smoothstep_slope(4.0 - r)
        return np.where(r < 3.0, inner, outer)

    @property
    def radii(self) -> tuple:
        return (2.0 * self.delta, 4.0 * self.delta, 3.0, 4.0)


def _check_cutoff(c: Cutoff, n: int = 4001):
    r = np.concatenate([np.linspace(0.0, 4.0 * c.delta, n), np.linspace(3.0, 4.5, n)])
    v = c.radial_value(r)
    g = np.abs(c.radial_slope(r))
    near = r <= 4.0 * c.delta
    ok = (np.all((v >= 0.0) & (v <= 1.0))
          and np.all(v[r <= 2.0 * c.delta] == 0.0) and np.all(v[r >= 4.0] == 0.0)
          and c.radial_value(np.array([4.0 * c.delta, 1.0, 3.0])).min() == 1.0
          and g[near].max() <= 1.0 / c.delta and g[~near].max() <= 2.0)
    if not ok:
        raise ValueError("cutoff profile violates its plateau or gradient bounds")


def eval_cutoff(c: Cutoff, x) -> np.ndarray:
    return c.radial_value(np.linalg.norm(np.asarray(x, float), axis=-1))


def eval_cutoff_grad(c: Cutoff, x) -> np.ndarray:
    x = np.asarray(x, float)
    r = np.linalg.norm(x, axis=-1)
    safe = np.where(r > 0.0, r, 1.0)
    return (c.radial_slope(r) / safe)[..., None] * x


@dataclass(frozen=True)
class TruncatedBubble:
    cutoff: Cutoff
    bubble: Bubble


def eval_truncated(t: TruncatedBubble, x, params: FracParams) -> np.ndarray:
    return eval_cutoff(t.cutoff, x) * eval_bubble(t.bubble, x, params)


def eval_truncated_grad(t: TruncatedBubble, x, params: FracParams) -> np.ndarray:
    phi = eval_cutoff(t.cutoff, x)
    u = eval_bubble(t.bubble, x, params)
    return (eval_cutoff_grad(t.cutoff, x) * u[..., None]
            + phi[..., None] * eval_bubble_grad(t.bubble, x, params))


# ------------------------------------------------------------ FieldFn views

def bubble_field(b: Bubble, params: FracParams) -> FieldFn:
    n = params.dim
    z = _as_point(b.z, n)
    b = Bubble(b.eps, tuple(z))
    return FieldFn(
        n, lambda x: eval_bubble(b, x, params), lambda x: eval_bubble_grad(b, x, params),
        support_radius=b.eps, support_center=tuple(z), decay=n - 2.0 * params.s,
        features=(Feature(tuple(z), b.eps),), radial=True,
        lipschitz=(n - 2.0 * params.s) * b.eps ** (-params.bubble_power) / (2.0 * b.eps))


def cutoff_field(c: Cutoff, dim: int) -> FieldFn:
    return FieldFn(
        dim, lambda x: eval_cutoff(c, x), lambda x: eval_cutoff_grad(c, x),
        support_radius=4.0, features=(Feature((0.0,) * dim, c.delta, c.radii),),
        radial=True, lipschitz=1.0 / c.delta)


def truncated_field(t: TruncatedBubble, params: FracParams) -> FieldFn:
    n = params.dim
    z = _as_point(t.bubble.z, n)
    feats = (Feature((0.0,) * n, t.cutoff.delta, t.cutoff.radii), Feature(tuple(z), t.bubble.eps))
    from .quadrature import merge_features
    feats = merge_features(feats)
    lip = (t.bubble.eps ** (-params.bubble_power)
           * ((n - 2.0 * params.s) / (2.0 * t.bubble.eps) + 1.0 / t.cutoff.delta))
    return FieldFn(
        n, lambda x: eval_truncated(t, x, params), lambda x: eval_truncated_grad(t, x, params),
        support_radius=4.0, features=feats, radial=len(feats) == 1, lipschitz=lip)


def normalize(u: FieldFn, params: FracParams, q: QuadratureConfig | None = None) -> FieldFn:
    """Pi(u) = u / ||u||_{L^{2N/(N-2s)}}."""
    lp = lp_integral(u, params.p_crit, params, q)
    if not lp > 0.0:
        raise ZeroFunctionError("cannot normalize the zero function")
    return u.scaled(lp ** (-1.0 / params.p_crit))


def h_interp(eps_bar: float, eps: float, t: float) -> float:
    """Scale profile along the radius of B_1: eps_bar on [0, 1/2], linear to eps at 1."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if not 0.0 < eps <= eps_bar:
        raise ValueError("need 0 < eps <= eps_bar")
    if t <= 0.5:
        return float(eps_bar)
    return float(2.0 * (1.0 - t) * eps_bar + (2.0 * t - 1.0) * eps)
