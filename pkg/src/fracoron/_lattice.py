"""Lattice sums behind the discrete nonlocal forms.

Two stencils are provided on the integer lattice (grid spacing 1; the
physical form scales by h^{N-2s}):

* Galerkin: m(k) is the Gagliardo inner product of the tensor hat functions
  centered at 0 and k. With B the autocorrelation of the hat (the centered
  cubic B-spline), m(k) = int |v|^{-N-2s} [2B(k) - B(k+v) - B(k-v)] dv.
* Riemann: pair weights |k|^{-N-2s} off the diagonal, with the diagonal
  equal to twice the Epstein zeta function Z_N(N+2s).
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma, gammaincc, roots_jacobi

from .core import sphere_area

_NEAR = 3  # offsets with max |k_i| <= _NEAR use the exact cell decomposition


def spline_1d(t):
    """Autocorrelation of the unit hat: the centered cubic B-spline."""
    t = np.abs(t)
    return np.where(t <= 1.0, 2.0 / 3.0 - t ** 2 + 0.5 * t ** 3,
                    np.where(t <= 2.0, (2.0 - t) ** 3 / 6.0, 0.0))


def spline(v):
    return np.prod(spline_1d(v), axis=-1)


def _tensor_rule(dim: int, n: int):
    x, w = leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    pts = np.stack(np.meshgrid(*([x] * dim), indexing="ij"), -1).reshape(-1, dim)
    wts = np.prod(np.stack(np.meshgrid(*([w] * dim), indexing="ij"), -1).reshape(-1, dim), 1)
    return pts, wts


def _regular_cell(k, cell, dim, s, rule):
    # a unit cell not touching v = 0; the spline pieces are polynomial inside it
    pts, wts = rule
    v = pts + cell
    r = np.linalg.norm(v, axis=1)
    num = spline(k + v) + spline(k - v) - 2.0 * spline(k)
    return -float(np.sum(wts * num * r ** (-dim - 2.0 * s)))


def _corner_cell(k, signs, dim, s, n):
    # the cell at the origin, split into pyramids by the largest coordinate;
    # along each ray the numerator is O(rho^2), leaving the weight rho^{1-2s}
    xj, wj = roots_jacobi(n, 0.0, 1.0 - 2.0 * s)
    rho = 0.5 * (xj + 1.0)
    wr = wj / 2.0 ** (2.0 - 2.0 * s)
    total = 0.0
    if dim > 1:
        tp, tw = _tensor_rule(dim - 1, n)
    else:
        tp, tw = np.zeros((1, 0)), np.ones(1)
    for m in range(dim):
        dirs = np.insert(tp, m, 1.0, axis=1) * signs
        v = rho[:, None, None] * dirs[None]
        num = spline(k + v) + spline(k - v) - 2.0 * spline(k)
        f = num / rho[:, None] ** 2 * np.sum(dirs ** 2, -1)[None] ** (-0.5 * (dim + 2.0 * s))
        total -= float(np.sum(wr[:, None] * tw[None] * f))
    return total


def _outside_cube(dim, s, half, n=40):
    # int_{|v|_inf > half} |v|^{-N-2s} dv
    if dim == 1:
        return 2.0 * half ** (-2.0 * s) / (2.0 * s)
    tp, tw = leggauss(n)
    pts = np.stack(np.meshgrid(*([tp] * (dim - 1)), indexing="ij"), -1).reshape(-1, dim - 1)
    wts = np.prod(np.stack(np.meshgrid(*([tw] * (dim - 1)), indexing="ij"), -1).reshape(-1, dim - 1), 1)
    face = float(np.sum(wts * (1.0 + np.sum(pts ** 2, 1)) ** (-0.5 * (dim + 2.0 * s))))
    return 2.0 * dim * face * half ** (-2.0 * s) / (2.0 * s)


def galerkin_entry(k, dim: int, s: float, order: int = 8) -> float:
    """m(k) on the unit lattice."""
    k = np.asarray(k, float)
    kmax = int(np.max(np.abs(k)))
    if kmax > _NEAR:
        return galerkin_far(k[None], dim, s, order)[0]
    half = kmax + 2
    rule = _tensor_rule(dim, order)
    total = 0.0
    for c in itertools.product(range(-half, half), repeat=dim):
        c = np.array(c, float)
        if np.all((c == 0.0) | (c == -1.0)):
            total += _corner_cell(k, np.where(c == 0.0, 1.0, -1.0), dim, s, order + 4)
        else:
            total += _regular_cell(k, c, dim, s, rule)
    # beyond the cube only the 2B(k) term survives
    total += 2.0 * float(spline(k)) * _outside_cube(dim, s, float(half))
    return total


def galerkin_far(ks, dim: int, s: float, order: int = 8) -> np.ndarray:
    """m(k) = -2 int B(u) |u - k|^{-N-2s} du, valid once B(k) = 0 and 0 is off the support."""
    pts, wts = _tensor_rule(dim, order)
    cells = np.array(list(itertools.product(range(-2, 2), repeat=dim)), float)
    u = (pts[None] + cells[:, None]).reshape(-1, dim)
    bw = spline(u) * np.tile(wts, len(cells))
    ks = np.asarray(ks, float)
    out = np.empty(len(ks))
    for i, k in enumerate(ks):
        r = np.linalg.norm(u - k, axis=1)
        out[i] = -2.0 * float(np.sum(bw * r ** (-dim - 2.0 * s)))
    return out


def _sorted_offsets(dim: int, kmax: int):
    return [k for k in itertools.combinations_with_replacement(range(kmax + 1), dim)]


def _fill_symmetric(dim: int, kmax: int, values: dict) -> np.ndarray:
    table = np.empty((kmax + 1,) * dim)
    for k in itertools.product(range(kmax + 1), repeat=dim):
        table[k] = values[tuple(sorted(k))]
    return table


@lru_cache(maxsize=16)
def galerkin_table(dim: int, s: float, kmax: int) -> np.ndarray:
    """m(k) for all 0 <= k_i <= kmax; m depends on |k_i| and is permutation symmetric."""
    offs = _sorted_offsets(dim, kmax)
    near = [k for k in offs if max(k) <= _NEAR]
    far = [k for k in offs if max(k) > _NEAR]
    vals = {k: galerkin_entry(k, dim, s) for k in near}
    if far:
        vals.update(zip(far, galerkin_far(np.array(far), dim, s)))
    return _fill_symmetric(dim, kmax, vals)


def _upper_gamma(a: float, x):
    """Gamma(a, x) for any real a and x > 0 (downward recurrence for a <= 0)."""
    x = np.asarray(x, float)
    if a > 0:
        return gamma(a) * gammaincc(a, x)
    # Gamma(a, x) = (Gamma(a+1, x) - x^a e^{-x}) / a
    return (_upper_gamma(a + 1.0, x) - x ** a * np.exp(-x)) / a


@lru_cache(maxsize=32)
def epstein_zeta(dim: int, sigma: float, cut: int = 6) -> float:
    """Z_N(sigma) = sum over nonzero integer k of |k|^{-sigma}, for sigma > N.

    Ewald splitting of the theta function at t = 1; both lattice sums
    converge like exp(-pi |k|^2).
    """
    if sigma <= dim:
        raise ValueError("Epstein zeta sum diverges for sigma <= dim")
    rng = np.arange(-cut, cut + 1)
    k = np.stack(np.meshgrid(*([rng] * dim), indexing="ij"), -1).reshape(-1, dim)
    r2 = np.sum(k ** 2, 1).astype(float)
    r2 = r2[r2 > 0]
    x = math.pi * r2
    a, b = 0.5 * sigma, 0.5 * (dim - sigma)
    direct = np.sum(x ** (-a) * _upper_gamma(a, x))
    dual = np.sum(x ** (-b) * _upper_gamma(b, x))
    lhs = direct + dual - 1.0 / a - 1.0 / (0.5 * dim - a)
    return float(lhs * math.pi ** a / gamma(a))


@lru_cache(maxsize=16)
def riemann_table(dim: int, s: float, kmax: int) -> np.ndarray:
    """Stiffness of the pair sum sum_{i != j} |k|^{-N-2s} (u_i - u_j)^2 over the full lattice."""
    rng = np.arange(kmax + 1)
    k = np.stack(np.meshgrid(*([rng] * dim), indexing="ij"), -1)
    r = np.linalg.norm(k, axis=-1)
    with np.errstate(divide="ignore"):
        table = -2.0 * r ** (-dim - 2.0 * s)
    table[(0,) * dim] = 2.0 * epstein_zeta(dim, dim + 2.0 * s)
    return table


def lattice_tail(dim: int, s: float, kmax: int) -> float:
    """Approximate sum over |k|_inf > kmax of |k|^{-N-2s} (for sum-rule checks)."""
    return _outside_cube(dim, s, kmax + 0.5)


def sphere_measure(dim: int) -> float:
    return sphere_area(dim)
