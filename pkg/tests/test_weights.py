import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lifespan_lab.weights import (CumulativeIntegral, Grid1D, HermiteAntiderivative,
                                  QuadratureError, SmoothCutoffs, WeightParams, adaptive_quad,
                                  bump_mass, data_norm, gl_integrate, golden_max, jb, phi_nu,
                                  psi_nu, smooth_bump, smooth_bump_derivs, smoothstep,
                                  w_nu_kappa, weighted_sup)


def test_jb_survives_huge_arguments():
    assert jb(0.0) == 1.0
    assert jb(1e300) == pytest.approx(1e300)
    assert np.isfinite(jb(1e308))


@given(st.floats(-1e6, 1e6))
def test_jb_dominates_abs_and_one(z):
    v = jb(z)
    assert v >= 1.0 and v >= abs(z)


def test_weight_params_reject_bad_lambda():
    with pytest.raises(ValueError):
        WeightParams(lam=0.6)
    with pytest.raises(ValueError):
        WeightParams(rho=-1.0)


def test_grid_refinement_keeps_old_nodes():
    g = Grid1D(0.0, 1.0, 11)
    fine = g.refined()
    assert fine.step == pytest.approx(g.step / 2)
    np.testing.assert_allclose(fine.points()[::2], g.points())


def test_psi_and_phi_branches():
    assert psi_nu(0.0, 1.0) == pytest.approx(math.log(3.0))
    assert psi_nu(0.5, 3.0) == 1.0
    assert phi_nu(1.0, 5.0, 5.0) == pytest.approx(1.0)
    assert phi_nu(-1.0, 0.0, 0.0) == pytest.approx(1.0)
    # on the light cone <t+r>/<t-r> = <2t>
    assert phi_nu(0.0, 3.0, 3.0) == pytest.approx(1.0 / math.log(2.0 + jb(6.0)))


def test_w_nu_kappa_uses_the_smaller_bracket():
    assert w_nu_kappa(0.0, 1.0, 10.0, 1.0) == pytest.approx(jb(1.0))
    assert w_nu_kappa(0.0, 1.0, 10.0, 10.0) == pytest.approx(1.0)


def test_weighted_sup_rejects_nan_and_weights_by_r():
    with pytest.raises(ValueError):
        weighted_sup([1.0, np.nan], 0.0, [1.0, 2.0])
    assert weighted_sup([0.0, 2.0], 0.0, [5.0, 0.0]) == pytest.approx(2.0)


def test_data_norm_counts_all_three_parts():
    r = np.array([0.0, 1.0])
    assert data_norm(0.0, r, np.array([1.0, 0]), np.array([0.0, 2.0]), np.array([0.0, 1.0])) == 3.0


def test_adaptive_quad_against_closed_forms():
    assert adaptive_quad(np.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-12)
    assert adaptive_quad(lambda x: np.exp(-x * x), -8, 8, tol=1e-14) == pytest.approx(math.sqrt(math.pi), abs=1e-12)


def test_adaptive_quad_reports_failure():
    with pytest.raises(QuadratureError):
        adaptive_quad(lambda x: 1.0 / np.abs(x - 0.3) ** 0.999, 0.0, 1.0, tol=1e-14, max_depth=6)


def test_gauss_legendre_integrates_polynomials_exactly():
    assert gl_integrate(lambda x: x**7 + 3 * x**2, 0.0, 2.0, n=8) == pytest.approx(2**8 / 8 + 8, rel=1e-14)


def test_cumulative_integral_matches_antiderivative():
    ci = CumulativeIntegral(np.cos, 0.0, 3.0, panels=50)
    x = np.linspace(0.0, 3.0, 37)
    np.testing.assert_allclose(ci(x), np.sin(x), atol=1e-13)


def test_hermite_antiderivative_is_accurate_between_edges():
    H = HermiteAntiderivative(np.cos, lambda x: -np.sin(x), 0.0, 4.0, panels=64)
    x = np.linspace(0.0, 4.0, 1001)
    np.testing.assert_allclose(H(x), np.sin(x), atol=1e-12)
    assert H.total == pytest.approx(math.sin(4.0), abs=1e-14)
    # clamped outside the table
    assert H(-1.0) == 0.0 and H(9.0) == pytest.approx(H.total)


def test_smooth_bump_derivatives_agree_with_differences():
    x = np.linspace(0.05, 0.95, 19)
    h = 1e-5
    for k in (1, 2, 3):
        fd = (smooth_bump_derivs(x + h, k - 1) - smooth_bump_derivs(x - h, k - 1)) / (2 * h)
        np.testing.assert_allclose(smooth_bump_derivs(x, k), fd, rtol=1e-6, atol=1e-8)
    assert smooth_bump(0.5) == pytest.approx(math.exp(-4.0))
    with pytest.raises(ValueError):
        smooth_bump_derivs(0.5, 4)


def test_bump_mass_and_smoothstep_plateaus():
    assert bump_mass() == pytest.approx(adaptive_quad(smooth_bump, 0.0, 1.0, tol=1e-14), rel=1e-12)
    assert smoothstep(-1.0) == 0.0 and smoothstep(2.0) == 1.0
    assert smoothstep(0.5) == pytest.approx(0.5, abs=1e-14)


@settings(max_examples=50)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_smoothstep_is_monotone(a, b):
    lo, hi = sorted((a, b))
    assert smoothstep(lo) <= smoothstep(hi) + 1e-15


def test_cutoff_supports():
    cut = SmoothCutoffs()
    assert cut.chi(0.5) == 1.0 and cut.chi(2.5) == 0.0
    assert cut.xi(0.25) == 0.0 and cut.xi(0.8) == 1.0
    assert cut.chi(1.5, 1) < 0 < cut.xi(0.6, 1)


def test_golden_max_finds_the_peak():
    x, fx = golden_max(lambda x: -(x - 0.3) ** 2 + 2.0, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-7) and fx == pytest.approx(2.0)
