"""Parameters, annular domains, grid functions and the normalizing constant C(N, s).

Everything else in the package consumes the types defined here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma, roots_jacobi


class FracoronError(Exception):
    """Base class for all library errors."""


class QuadratureError(FracoronError):
    """Refinement did not reach the requested tolerance."""


class CapabilityError(FracoronError):
    """A field lacks the information an operation needs (e.g. a gradient)."""


class DegenerateDomainError(FracoronError):
    """The grid does not resolve the domain."""


class ZeroFunctionError(FracoronError):
    """A quotient was requested for the zero function."""


class FitDomainError(FracoronError):
    """Scaling fit received nonpositive data."""


@dataclass(frozen=True)
class FracParams:
    """Dimension N and fractional order s, with N > 2s."""

    dim: int
    s: float
    c_ns: float | None = None

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if self.dim <= 2.0 * self.s:
            raise ValueError(f"need dim > 2s, got dim={self.dim}, s={self.s}")
        if self.c_ns is not None and not self.c_ns > 0.0:
            raise ValueError("cached c_ns must be positive")

    @property
    def p_crit(self) -> float:
        """Critical exponent 2N/(N-2s)."""
        return 2.0 * self.dim / (self.dim - 2.0 * self.s)

    @property
    def bubble_power(self) -> float:
        return 0.5 * (self.dim - 2.0 * self.s)

    @property
    def window_factor(self) -> float:
        """2^{2s/N}: ratio of the top of the compactness window to S."""
        return 2.0 ** (2.0 * self.s / self.dim)

    def with_constant(self, q: "QuadratureConfig | None" = None) -> "FracParams":
        if self.c_ns is not None:
            return self
        return FracParams(self.dim, self.s, c_ns(self, q or QuadratureConfig()))


@dataclass(frozen=True)
class QuadratureConfig:
    """Knobs shared by the continuum quadratures.

    far_subdivisions: angular directions per half turn for sphere rules.
    near_radius: radius of the Taylor ball around the diagonal, relative to
        the local length scale of the field.
    near_refinement: Gauss-Legendre order per radial panel.
    tail_radius: truncation radius, relative to the field's extent, beyond
        which analytic tails are used.
    rel_tol: acceptance tolerance between successive refinement levels.
    max_level: number of refinements attempted before giving up.
    """

    far_subdivisions: int = 12
    near_radius: float = 1e-2
    near_refinement: int = 6
    tail_radius: float = 1e3
    rel_tol: float = 1e-4
    max_level: int = 3

    def __post_init__(self):
        if min(self.far_subdivisions, self.near_refinement) <= 0:
            raise ValueError("subdivision counts must be positive")
        if not 0.0 < self.near_radius < self.tail_radius:
            raise ValueError("need 0 < near_radius < tail_radius")
        if not self.rel_tol > 0.0:
            raise ValueError("rel_tol must be positive")
        if self.max_level < 1:
            raise ValueError("max_level must be at least 1")


@dataclass(frozen=True)
class AnnulusDomain:
    """Omega = {r_inner < |x - center| < r_outer}, meshed inside bounding_box."""

    center: tuple
    r_inner: float
    r_outer: float
    bounding_box: tuple = ()

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", c)
        if not 0.0 < self.r_inner < self.r_outer:
            raise ValueError("need 0 < r_inner < r_outer")
        if not self.bounding_box:
            # pad by 10% so the outer boundary is surrounded by exterior nodes
            half = 1.1 * self.r_outer
            box = tuple((ci - half, ci + half) for ci in c)
            object.__setattr__(self, "bounding_box", box)
        box = tuple((float(lo), float(hi)) for lo, hi in self.bounding_box)
        object.__setattr__(self, "bounding_box", box)
        if len(box) != len(c):
            raise ValueError("bounding box dimension mismatch")
        for (lo, hi), ci in zip(box, c):
            if lo > ci - self.r_outer or hi < ci + self.r_outer:
                raise ValueError("bounding box must contain the closed annulus")

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, x) -> np.ndarray:
        r = np.linalg.norm(np.asarray(x, float) - np.asarray(self.center), axis=-1)
        return (r > self.r_inner) & (r < self.r_outer)


@dataclass
class GridFunction:
    """Nodal values on a uniform tensor grid, zero at nodes outside Omega.

    Nodes sit at center + h*(i - resolution//2) along each axis, so one node
    lies exactly at the annulus center. h is chosen so the half-width of the
    bounding box spans resolution//2 cells.
    """

    domain: AnnulusDomain
    resolution: int
    values: np.ndarray
    mask: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        shape = (self.resolution,) * self.domain.dim
        if self.mask is None:
            self.mask = self.domain.contains(grid_points(self.domain, self.resolution))
        self.values = np.asarray(self.values, dtype=float).reshape(shape)
        if self.mask.shape != shape:
            raise ValueError("mask shape mismatch")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")
        self.values = np.where(self.mask, self.values, 0.0)

    @property
    def h(self) -> float:
        return grid_spacing(self.domain, self.resolution)

    def points(self) -> np.ndarray:
        return grid_points(self.domain, self.resolution)

    def interior(self) -> np.ndarray:
        """Values at the masked nodes, in row-major order."""
        return self.values[self.mask]

    def with_interior(self, vec) -> "GridFunction":
        vals = np.zeros_like(self.values)
        vals[self.mask] = vec
        return GridFunction(self.domain, self.resolution, vals, self.mask)


def grid_spacing(domain: AnnulusDomain, resolution: int) -> float:
    half = min(hi - ci for (lo, hi), ci in zip(domain.bounding_box, domain.center))
    return half / (resolution // 2)


def grid_points(domain: AnnulusDomain, resolution: int) -> np.ndarray:
    """Node coordinates with shape (res,)*N + (N,)."""
    h = grid_spacing(domain, resolution)
    axes = [c + h * (np.arange(resolution) - resolution // 2) for c in domain.center]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def make_grid(domain: AnnulusDomain, resolution: int) -> GridFunction:
    if resolution < 4:
        raise ValueError("resolution must be at least 4")
    mask = domain.contains(grid_points(domain, resolution))
    if mask.sum() < 8:
        raise DegenerateDomainError(
            f"only {int(mask.sum())} interior nodes at resolution {resolution}")
    return GridFunction(domain, resolution, np.zeros(mask.shape), mask)


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim (2 for dim = 1)."""
    return 2.0 * math.pi ** (dim / 2.0) / gamma(dim / 2.0)


def c_ns_closed_form(params: FracParams) -> float:
    """Gamma-function expression for C(N, s)."""
    n, s = params.dim, params.s
    return s * 4.0 ** s * gamma(0.5 * n + s) / (math.pi ** (0.5 * n) * gamma(1.0 - s))


def _transverse_factor(n: int, s: float, order: int) -> float:
    # int_{R^{N-1}} (1+|eta|^2)^{-(N+2s)/2} d eta, via eta = tan(theta) radially:
    # |S^{N-2}| * int_0^{pi/2} sin^{N-2} cos^{2s}; Gauss-Jacobi absorbs cos^{2s} at pi/2
    if n == 1:
        return 1.0
    x, w = roots_jacobi(order, 2.0 * s, 0.0)
    theta = 0.25 * math.pi * (1.0 + x)
    ratio = np.sin(0.25 * math.pi * (1.0 - x)) / (1.0 - x)
    vals = np.sin(theta) ** (n - 2) * ratio ** (2.0 * s)
    return sphere_area(n - 1) * 0.25 * math.pi * float(np.sum(w * vals))


def _oscillatory_tail(a: float, t: float, terms: int = 4) -> tuple[float, float]:
    # int_T^inf cos(t) t^{-a} dt by repeated integration by parts, with a bound
    # on the dropped remainder (|int_T^inf cos t t^{-b}| <= 2 T^{-b})
    total, coef, b = 0.0, 1.0, a
    for _ in range(terms):
        total += coef * (-math.sin(t) * t ** -b + b * math.cos(t) * t ** -(b + 1.0))
        coef *= -b * (b + 1.0)
        b += 2.0
    return total, abs(coef) * 2.0 * t ** -b


def _line_integral(s: float, level: int, q: QuadratureConfig) -> tuple[float, float]:
    """2 * int_0^inf (1 - cos t) t^{-1-2s} dt at a given refinement level."""
    order = q.near_refinement + 2 * level
    # [0, 1]: 1 - cos t = 2 sin^2(t/2) avoids cancellation; weight t^{1-2s}
    xj, wj = roots_jacobi(order, 0.0, 1.0 - 2.0 * s)
    t = 0.5 * (xj + 1.0)
    near = 2.0 ** (2.0 * s - 2.0) * np.sum(wj * 2.0 * np.sin(0.5 * t) ** 2 / t ** 2)
    # [1, T]: composite Gauss panels
    T = max(q.tail_radius, 50.0)
    npan = int(math.ceil((T - 1.0) * 2 ** level))
    edges = np.linspace(1.0, T, npan + 1)
    xg, wg = leggauss(order)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    tt = mid + half * xg[None, :]
    mid_part = np.sum(half * wg[None, :] * 2.0 * np.sin(0.5 * tt) ** 2 * tt ** (-1.0 - 2.0 * s))
    # [T, inf): power law minus the oscillatory part
    osc, bound = _oscillatory_tail(1.0 + 2.0 * s, T)
    tail = T ** (-2.0 * s) / (2.0 * s) - osc
    return 2.0 * float(near + mid_part + tail), 2.0 * bound


def c_ns(params: FracParams, q: QuadratureConfig | None = None) -> float:
    """C(N, s) = (int_{R^N} (1 - cos z_1)/|z|^{N+2s} dz)^{-1} by quadrature.

    Fubini over the hyperplanes z_1 = t reduces the integral to a line
    integral in t times a transverse factor; both are refined until
    successive levels agree to q.rel_tol.
    """
    q = q or QuadratureConfig()
    n, s = params.dim, params.s
    prev = None
    history = []
    for level in range(q.max_level + 2):
        line, bound = _line_integral(s, level, q)
        trans = _transverse_factor(n, s, q.near_refinement + 8 + 4 * level)
        val = line * trans
        if prev is not None:
            history.append(abs(val - prev))
            if abs(val - prev) <= q.rel_tol * abs(val) and bound <= q.rel_tol * abs(line):
                return 1.0 / val
        prev = val
    raise QuadratureError(
        f"C(N,s) refinement did not converge: successive differences {history}")
