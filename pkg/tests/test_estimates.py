import math

import numpy as np
import pytest

import oracles
from fracoron import (Bubble, Cutoff, FitDomainError, QuadratureConfig, TruncatedBubble, bubble_field,
                      energy_excess, excess_plateau, fit_scaling, gagliardo_sq, norm_deficit,
                      normalize, rayleigh, rayleigh_gap, sobolev_constant, truncated_field)
from fracoron.estimates import (ScalingReport, ball_samples, deficit_sweep, delta_sweep,
                                excess_sweep, family_member, map_ordered, model_ratio_spread,
                                sphere_points)

EPS = 0.05
Z0 = (0.0, 0.0)


def _kappa(p2):
    # <w, U> = kappa int U^{p-1} w, with kappa = S (int U^p)^{2/p - 1} and int U^4 = pi
    return sobolev_constant(p2) * math.pi ** (-0.5)


@pytest.mark.parametrize("delta", [EPS / 4, EPS / 16])
def test_excess_agrees_with_the_bubble_equation(p2, delta):
    t = TruncatedBubble(Cutoff(delta), Bubble(EPS, Z0))
    u, U = truncated_field(t, p2), bubble_field(t.bubble, p2)
    c = t.cutoff

    def integrand(r):
        return (EPS / (EPS ** 2 + r * r)) ** 2 * (1 - float(c.radial_value(r)))
    cross = oracles.radial_integral_2d(integrand, 1e4, c.radii) + math.pi * EPS ** 2 / (EPS ** 2 + 1e8)
    route = gagliardo_sq(U - u, p2) - 2 * _kappa(p2) * cross
    assert energy_excess(t, p2) == pytest.approx(route, rel=2e-4, abs=1e-4)


def test_plateau_agrees_with_the_bubble_equation(p2):
    def one_minus_phi(r):
        return 1 - float(Cutoff(0.05).radial_value(r)) if r > 1 else 0.0
    cross = (oracles.radial_integral_2d(lambda r: (EPS / (EPS ** 2 + r * r)) ** 2 * one_minus_phi(r),
                                        1e4, (3.0, 4.0)) + math.pi * EPS ** 2 / (EPS ** 2 + 1e8))
    from fracoron.estimates import _outer_only_field
    u = _outer_only_field(Bubble(EPS, Z0), p2)
    U = bubble_field(Bubble(EPS, Z0), p2)
    route = gagliardo_sq(U - u, p2) - 2 * _kappa(p2) * cross
    assert excess_plateau(Bubble(EPS, Z0), p2) == pytest.approx(route, rel=2e-4)


@pytest.mark.parametrize("delta", [EPS / 2, EPS / 8, EPS / 64])
def test_deficit_matches_radial_integral(p2, delta):
    c = Cutoff(delta)

    def integrand(r):
        return (EPS / (EPS ** 2 + r * r)) ** 2 * (1 - float(c.radial_value(r)) ** 4)
    ref = oracles.radial_integral_2d(integrand, 1e4, c.radii) + math.pi * EPS ** 2 / (EPS ** 2 + 1e8)
    t = TruncatedBubble(c, Bubble(EPS, Z0))
    assert norm_deficit(t, p2, QuadratureConfig(rel_tol=1e-7)) == pytest.approx(ref, rel=1e-5)


def test_deficit_is_nonnegative_off_center(p2):
    t = TruncatedBubble(Cutoff(0.01), Bubble(EPS, (0.6, 0.0)))
    assert norm_deficit(t, p2) >= 0


def test_excess_slope_in_the_deep_regime(p2):
    # far below the bubble scale the excess approaches its plateau like delta^{N-2s}
    pl = excess_plateau(Bubble(EPS, Z0), p2)
    sweep = [(d, energy_excess(TruncatedBubble(Cutoff(d), Bubble(EPS, Z0)), p2))
             for d in EPS * 2.0 ** -np.arange(9, 5, -1)]
    rep = fit_scaling(sweep, subtract_baseline=True, baseline=pl)
    assert rep.fitted_slope == pytest.approx(1.0, abs=0.1)
    assert rep.r_squared > 0.99


def test_deficit_slope_in_the_deep_regime(p2):
    # the outer ramp leaves a delta-independent floor; above it the deficit scales like delta^N
    def outer(r):
        return (EPS / (EPS ** 2 + r * r)) ** 2 * (1 - float(Cutoff(0.05).radial_value(r)) ** 4) if r > 1 else 0.0
    floor = oracles.radial_integral_2d(outer, 1e4, (3.0, 4.0)) + math.pi * EPS ** 2 / (EPS ** 2 + 1e8)
    sweep = [(d, norm_deficit(TruncatedBubble(Cutoff(d), Bubble(EPS, Z0)), p2, QuadratureConfig(rel_tol=1e-7)))
             for d in EPS * 2.0 ** -np.arange(9, 5, -1)]
    rep = fit_scaling(sweep, subtract_baseline=True, baseline=floor)
    assert rep.fitted_slope == pytest.approx(2.0, abs=0.1)
    assert rep.r_squared > 0.99


def test_excess_one_sided_bound_over_the_sweep(p2):
    n, s = 2, 0.5
    sweep = excess_sweep(EPS, Z0, p2, 4)

    def model(d):
        x = d / EPS
        return x ** (n - 2 * s) + x ** (n + 2 - 2 * s) + EPS ** (n - 2 * s)
    assert model_ratio_spread(sweep, model) < 10


def test_deficit_one_sided_bound_over_the_sweep(p2):
    sweep = deficit_sweep(EPS, Z0, p2, 4)
    assert all(y >= 0 for _, y in sweep)
    assert model_ratio_spread(sweep, lambda d: (d / EPS) ** 2 + EPS ** 2) < 10


def test_truncations_never_beat_the_sobolev_constant(p2):
    S = sobolev_constant(p2)
    for d in (0.05, 0.01, 0.002):
        u = truncated_field(TruncatedBubble(Cutoff(d), Bubble(0.1, Z0)), p2)
        assert rayleigh(u, p2) >= S


def test_fit_exact_power_law():
    rep = fit_scaling([(x, x ** 2) for x in (0.1, 0.2, 0.4, 0.8)])
    assert rep.fitted_slope == pytest.approx(2.0, abs=1e-12)
    assert rep.r_squared == pytest.approx(1.0)


def test_fit_noisy_power_law():
    rng = np.random.default_rng(0)
    xs = np.geomspace(0.01, 1, 8)
    rep = fit_scaling([(x, 3 * x ** 1.5 * (1 + 0.01 * rng.standard_normal())) for x in xs])
    assert 1.4 <= rep.fitted_slope <= 1.6


def test_fit_baseline_semantics():
    sweep = [(x, 5 + x ** 1.0) for x in (1e-6, 0.1, 0.2, 0.4, 0.8)]
    rep = fit_scaling(sweep, subtract_baseline=True)
    # the smallest-x value is the baseline and leaves the fit
    assert rep.baseline == sweep[0][1]
    assert len(rep.fitted_points) == 4
    assert rep.fitted_slope == pytest.approx(1.0, abs=1e-4)
    rep = fit_scaling(sweep[1:], subtract_baseline=True, baseline=5.0)
    assert rep.fitted_slope == pytest.approx(1.0, abs=1e-12)


def test_fit_errors():
    with pytest.raises(FitDomainError):
        fit_scaling([(x, 2.0) for x in (0.1, 0.2, 0.3, 0.4, 0.5)], subtract_baseline=True)
    with pytest.raises(FitDomainError):
        fit_scaling([(0.1, 1.0), (0.2, 2.0), (0.3, 3.0)])
    with pytest.raises(FitDomainError):
        fit_scaling([(0.1, 1.0), (0.2, -2.0), (0.3, 3.0), (0.4, 1.0)])


def test_scaling_report_invariants():
    with pytest.raises(ValueError):
        ScalingReport(sweep=[(0.0, 1.0)], fitted_slope=1.0, r_squared=0.5)
    with pytest.raises(ValueError):
        ScalingReport(sweep=[(1.0, 1.0)], fitted_slope=1.0, r_squared=1.5)


def test_delta_sweep():
    assert delta_sweep(0.05, 4) == [0.05 / 16, 0.05 / 8, 0.05 / 4, 0.05 / 2]


def test_ball_samples():
    a, b = ball_samples(16, 2, seed=3), ball_samples(16, 2, seed=3)
    assert np.array_equal(a, b)
    r = np.linalg.norm(a, axis=1)
    assert a.shape == (16, 2) and np.all(r <= 1 + 1e-12)
    assert np.sum(np.isclose(r, 1.0)) >= 4
    assert not np.array_equal(a, ball_samples(16, 2, seed=4))
    assert np.allclose(np.linalg.norm(sphere_points(10, 3), axis=1), 1.0)


def test_map_ordered_keeps_order(monkeypatch):
    monkeypatch.setenv("FRACORON_THREADS", "3")
    assert map_ordered(lambda x: x * x, range(10)) == [x * x for x in range(10)]


def test_gap_at_the_center(p2):
    res = rayleigh_gap(0.05, [(0.0, 0.0)], p2)
    S = sobolev_constant(p2)
    assert S <= res.max_quotient <= res.threshold
    assert res.passes
    with pytest.raises(ValueError):
        rayleigh_gap(0.05, [(0.0, 0.0)], p2, varpi=0.5)


def test_family_member():
    t = family_member(0.05, (0.5, 0.0), None)
    assert t.cutoff.delta == pytest.approx(0.0025) and t.bubble.eps == 0.05


def test_normalized_member_quotient(p2):
    u = normalize(truncated_field(family_member(0.05, (0.0, 0.0), p2), p2), p2)
    assert rayleigh(u, p2) == pytest.approx(rayleigh(truncated_field(family_member(0.05, (0.0, 0.0), p2), p2), p2),
                                            rel=1e-6)
