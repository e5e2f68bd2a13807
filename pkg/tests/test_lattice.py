import numpy as np
import pytest

import oracles
from fracoron._lattice import (epstein_zeta, galerkin_entry, galerkin_far, galerkin_table,
                               lattice_tail, riemann_table)


@pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
def test_hat_stiffness_matches_closed_form_on_the_line(s):
    table = galerkin_table(1, s, 8)
    ref = np.array([oracles.hat_stiffness_1d(k, s) for k in range(9)])
    assert np.allclose(table, ref, rtol=1e-7, atol=1e-10)


def test_epstein_closed_forms():
    assert epstein_zeta(1, 1.5) == pytest.approx(oracles.epstein_1d(1.5), rel=1e-13)
    assert epstein_zeta(1, 2.2) == pytest.approx(oracles.epstein_1d(2.2), rel=1e-13)
    assert epstein_zeta(2, 3.0) == pytest.approx(oracles.epstein_2d(3.0), rel=1e-13)
    assert epstein_zeta(2, 2.5) == pytest.approx(oracles.epstein_2d(2.5), rel=1e-13)


def test_epstein_against_direct_sum_in_3d():
    r = np.arange(-40, 41)
    k = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    d = np.linalg.norm(k, axis=1)
    # sum over the cube plus the integral beyond it (sigma = N + 2s with s = 3/2)
    direct = np.sum(d[d > 0] ** -6.0) + lattice_tail(3, 1.5, 40)
    assert epstein_zeta(3, 6.0) == pytest.approx(direct, rel=1e-6)


def test_epstein_divergent():
    with pytest.raises(ValueError):
        epstein_zeta(2, 2.0)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_galerkin_sum_rule_in_the_plane(s):
    # constants have zero energy: the stencil sums to zero over Z^2
    km = 40
    t = galerkin_table(2, s, km)
    full = 4 * t[1:, 1:].sum() + 2 * t[0, 1:].sum() + 2 * t[1:, 0].sum() + t[0, 0]
    # remaining tail ~ -2 * sum |k|^{-2-2s} beyond the block
    tail = -2 * lattice_tail(2, s, km)
    assert abs(full + tail) <= 2e-3 * t[0, 0]


def test_galerkin_far_field_approaches_the_kernel():
    s = 0.5
    k = np.array([[30.0, 0.0], [20.0, 20.0]])
    vals = galerkin_far(k, 2, s)
    assert np.allclose(vals, -2 * np.linalg.norm(k, axis=1) ** -3.0, rtol=2e-3)


def test_near_and_far_rules_agree_at_the_switch():
    s = 0.5
    k = np.array([4.0, 1.0])
    assert galerkin_entry(k, 2, s) == pytest.approx(galerkin_far(k[None], 2, s)[0], rel=1e-6)


def test_galerkin_values_in_the_plane():
    t = galerkin_table(2, 0.5, 2)
    assert t[0, 0] == pytest.approx(11.6239, abs=2e-4)
    assert t[1, 0] == pytest.approx(0.35518, abs=2e-5)
    assert t[1, 1] == pytest.approx(-0.94386, abs=2e-5)
    assert t[0, 1] == t[1, 0]


def test_riemann_table():
    t = riemann_table(2, 0.5, 3)
    assert t[0, 0] == pytest.approx(2 * oracles.epstein_2d(3.0))
    assert t[1, 1] == pytest.approx(-2 * 2 ** -1.5)
