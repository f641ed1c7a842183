import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import hit_prob_exact
from slecover import (DeadPointError, DomainError, GreenParams, ParamError, c_star, evolve_point, green_h,
                      green_hit_prob_mc, harmonic_measure_mc, hull_points, integrate_green, local_mart,
                      stopped_martingale_mc, trace)
from slecover.observables import green_general, green_h_modulus_form, wilson_interval
from slecover.sle_sampler import SamplerConfig, chordal_driving, rescale, sample_chordal


def test_green_reference_values():
    assert green_h(1j, 2.0) == pytest.approx(1.0)
    assert green_h(2j, 2.0) == pytest.approx(2 ** -0.75, abs=1e-12)
    assert green_h(2j, 2.0) == pytest.approx(0.594604, abs=1e-6)


def test_green_scaling():
    z, r, kappa = 1 + 1j, 3.0, 8 / 3
    d = GreenParams(kappa).d
    assert green_h(r * z, kappa) == pytest.approx(r ** (d - 2) * green_h(z, kappa), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(1e-3, 10), st.floats(0.1, 7.9))
def test_green_exponent_forms_agree(x, y, kappa):
    z = complex(x, y)
    assert green_h_modulus_form(z, kappa) == pytest.approx(green_h(z, kappa), rel=1e-12)


def test_green_general_values():
    assert green_general(1.0, 1.0, 2.0) == pytest.approx(1.0)
    assert green_general(2.0, 1.0, 2.0) == pytest.approx(2 ** -0.75)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 3), st.floats(0.2, 5), st.floats(0.5, 7.5))
def test_green_general_covariance(x, y, r, kappa):
    z = complex(x, y)
    s = y / abs(z)
    d = GreenParams(kappa).d
    assert green_general(r * y, s, kappa) == pytest.approx(r ** (d - 2) * green_h(z, kappa), rel=1e-12)


def test_green_params_validation():
    with pytest.raises(ParamError):
        GreenParams(8.0)
    with pytest.raises(DomainError):
        green_h(1 - 1j, 2.0)


@pytest.mark.parametrize("kappa,exact", [(8 / 3, 1.5), (2.0, 16 / (3 * np.pi)), (8.0, 1.0), (4.0, 4 / np.pi)])
def test_c_star_closed_forms(kappa, exact):
    assert c_star(kappa) == pytest.approx(exact, abs=1e-10)


def test_wilson_interval_contains_estimate():
    c, h = wilson_interval(30, 100)
    assert c - h < 0.3 < c + h


# ----------------------------------------------------------- local martingale


def test_local_mart_at_zero():
    drv = chordal_driving(SamplerConfig(8 / 3, 1e-3, 1.0, seed=1))
    traj = evolve_point(drv, 0.4 + 1.1j)
    assert local_mart(traj, 8 / 3, 0.0) == pytest.approx(green_h(0.4 + 1.1j, 8 / 3), rel=1e-14)


def test_local_mart_dead_point():
    drv = chordal_driving(SamplerConfig(4.0, 1e-3, 2.0))
    drv = type(drv)(4.0, drv.times, np.zeros_like(drv.values))
    traj = evolve_point(drv, 1j)
    with pytest.raises(DeadPointError):
        local_mart(traj, 4.0, 1.5)


def test_local_mart_rescale_invariance():
    # M at (t, z) for the original equals r^(2-d) * M at (t/r^2, z/r) for the rescaled path
    kappa, r = 8 / 3, 2.0
    drv, tr = sample_chordal(SamplerConfig(kappa, 1e-3, 4.0, seed=2))
    d2, _ = rescale(drv, tr, r)
    z = 0.5 + 1.5j
    d = GreenParams(kappa).d
    m1 = local_mart(evolve_point(drv, z), kappa, 2.0)
    m2 = local_mart(evolve_point(d2, z / r), kappa, 0.5)
    assert m1 == pytest.approx(r ** (d - 2) * m2, rel=1e-9)


def test_stopped_martingale_mean():
    z, kappa = 2j, 8 / 3
    cfg = SamplerConfig(kappa, 1e-2, 1.0, seed=3)
    out = stopped_martingale_mc(z, 0.1, [0.5, 1.0], 3000, cfg)
    g = green_h(z, kappa)
    for _, mean, se in out:
        assert abs(mean - g) < 3 * se


# ----------------------------------------------------------- hit probability


def test_hit_prob_trivial_when_eps_above_im():
    est = green_hit_prob_mc(0.3 + 0.5j, 0.6, 10, SamplerConfig(2.0, 1e-2, 10.0))
    assert est.p_hat == 1.0


@pytest.mark.parametrize("kappa,z,eps", [(2.0, 1j, 0.2), (8 / 3, 0.5 + 1j, 0.1), (6.0, 1j, 0.3)])
def test_hit_prob_against_exact_series(kappa, z, eps):
    n = 4000
    est = green_hit_prob_mc(z, eps, n, SamplerConfig(kappa, 1e-2, 1e8, seed=11))
    exact = hit_prob_exact(z, eps, kappa)
    se = np.sqrt(exact * (1 - exact) / n)
    assert abs(est.p_hat - exact) < 3.5 * se


def test_hit_prob_scaling_with_z():
    kappa, eps, n = 2.0, 0.05, 4000
    cfg = SamplerConfig(kappa, 1e-2, 1e8, seed=12)
    p1 = green_hit_prob_mc(1j, eps, n, cfg).p_hat
    p2 = green_hit_prob_mc(2j, eps, n, cfg.with_replica(n)).p_hat
    d = GreenParams(kappa).d
    assert 0.7 * 2 ** (d - 2) <= p2 / p1 <= 1.3 * 2 ** (d - 2)


def test_exact_oracle_limit_matches_green():
    # the exact series approaches c* eps^(2-d) G(z) as eps -> 0
    kappa = 2.0
    d = GreenParams(kappa).d
    ratio = hit_prob_exact(1j, 1e-4, kappa) / (c_star(kappa) * 1e-4 ** (2 - d) * green_h(1j, kappa))
    assert ratio == pytest.approx(1.0, rel=1e-3)


# --------------------------------------------------------- harmonic measure


def test_harmonic_measure_symmetry():
    p, se = harmonic_measure_mc([], 1j, "negative_axis", 20000, seed=1)
    assert abs(p - 0.5) < 3 * se


def test_harmonic_measure_angle():
    theta = np.pi / 4
    p, se = harmonic_measure_mc([], np.exp(1j * theta), "negative_axis", 20000, seed=2)
    assert abs(p - theta / np.pi) < 3 * se + 2e-3


def test_harmonic_measure_of_slit_sides():
    # vertical slit [0, i]; from z = 2i both sides are hit equally often
    slit = np.array([0, 1j])
    left, se = harmonic_measure_mc([slit], 2j, "curve_left", 20000, seed=3)
    right, _ = harmonic_measure_mc([slit], 2j, "curve_right", 20000, seed=3)
    assert abs(left - right) < 4 * se


def test_harmonic_measure_comparability_band():
    # the smaller of the two sides seen from a point near the tip stays within [1/4, 4] of its sine proxy
    drv = chordal_driving(SamplerConfig(8 / 3, 1e-3, 1.0, seed=4))
    tr = trace(drv)
    arcs = list(hull_points(tr, per_step=4))
    z = tr.points[-1] + 0.3j
    left, _ = harmonic_measure_mc(arcs, z, "left", 20000, seed=4)
    right, _ = harmonic_measure_mc(arcs, z, "right", 20000, seed=5)
    traj = evolve_point(drv, z)
    s = traj.s[-1]
    assert 0.25 <= min(left, right) / s <= 4.0


def test_harmonic_measure_rejects_bad_arc():
    with pytest.raises(ParamError):
        harmonic_measure_mc([], 1j, "top", 10)


# ------------------------------------------------------------ Green integral


def test_integrate_green_converges():
    region = (-0.5, 2.0, 0.5, 3.0)
    v1 = integrate_green(region, 8 / 3, rtol=1e-6)
    v2 = integrate_green(region, 8 / 3, rtol=1e-9)
    assert v1 > 0 and v1 == pytest.approx(v2, rel=1e-5)


def test_integrate_green_degenerate():
    assert integrate_green((0, 1, 0, 2), 2.0) == 0.0


def test_integrate_green_scaling():
    kappa, r = 8 / 3, 2.0
    d = GreenParams(kappa).d
    region = (-0.5, 2.0, 0.5, 3.0)
    big = integrate_green(tuple(r * c for c in region), kappa, rtol=1e-9)
    assert big == pytest.approx(r ** d * integrate_green(region, kappa, rtol=1e-9), rel=1e-7)
