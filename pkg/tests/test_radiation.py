import math

import numpy as np
import pytest

from lifespan_lab.radiation import (CheckAntiderivative, CheckExtension, FreeSpaceData,
                                    RadialProfile, bump_profile, canonical_f1, decay_sup,
                                    fd_derivative, radiation_field_exterior_radial,
                                    radiation_field_free, radon_plane, radon_radial,
                                    richardson_ratio, zero_profile)
from lifespan_lab.weights import adaptive_quad, smooth_bump


def gaussian_radial(rho):
    return np.exp(-np.asarray(rho) ** 2)


def test_profile_support_is_validated():
    with pytest.raises(ValueError):
        RadialProfile(lambda r: r, (0.5, 2.0))
    with pytest.raises(ValueError):
        bump_profile(1.5, 1.0)


def test_canonical_datum_is_the_stretched_bump():
    f1 = canonical_f1()
    r = np.linspace(1.0, 5.0, 81)
    np.testing.assert_allclose(f1(r), smooth_bump((r - 2.0) / 2.0), atol=0, rtol=1e-15)
    assert f1.support == (2.0, 4.0)


def test_scaled_profile_scales_derivatives():
    f = canonical_f1().scaled(-2.0)
    assert f(3.0) == pytest.approx(-2.0 * canonical_f1()(3.0))
    assert f.deriv(2.5, 2) == pytest.approx(-2.0 * canonical_f1().deriv(2.5, 2))
    assert canonical_f1().scaled(0.0).is_zero


def test_check_extension_is_odd_about_one():
    ext = CheckExtension(canonical_f1())
    rho = np.linspace(1.0, 4.5, 50)
    np.testing.assert_allclose(ext(2.0 - rho), -ext(rho), atol=1e-15)
    np.testing.assert_allclose(ext.deriv(2.0 - rho, 1), ext.deriv(rho, 1), atol=1e-14)
    assert ext(3.0) == pytest.approx(3.0 * canonical_f1()(3.0))


def test_check_antiderivative_against_adaptive_quadrature():
    ext = CheckExtension(canonical_f1())
    K = CheckAntiderivative(ext)
    for x in (1.0, 2.3, 3.0, 3.7, 4.0, 6.0, -1.7):
        ref = adaptive_quad(ext, 1.0, x, tol=1e-14) if x != 1.0 else 0.0
        assert K(x) == pytest.approx(ref, abs=1e-13)


def test_gaussian_radon_transform_closed_form():
    for s in (0.0, 1.0, 2.0):
        assert radon_radial(gaussian_radial, s, 7.0) == pytest.approx(math.pi * math.exp(-s * s), abs=1e-10)


def test_radon_plane_rejects_non_unit_direction():
    with pytest.raises(ValueError):
        radon_plane(lambda y: np.ones(y.shape[:-1]), 0.0, [1.0, 1.0, 0.0], 1.0)


def test_radon_plane_outside_support_vanishes():
    assert radon_plane(lambda y: np.ones(y.shape[:-1]), 5.0, [0, 0, 1.0], 4.0) == 0.0
    assert radon_radial(gaussian_radial, 8.0, 7.0) == 0.0


def test_free_field_of_gaussian_velocity():
    data = FreeSpaceData.radial(None, gaussian_radial, 7.0)
    F = radiation_field_free(data, 0.5, [0, 0, 1.0])
    assert F == pytest.approx(math.pi * math.exp(-0.25) / (4 * math.pi), abs=1e-10)


def test_free_field_position_part_uses_the_derivative():
    data = FreeSpaceData.radial(gaussian_radial, None, 7.0)
    # -(d/ds) pi e^{-s^2} / (4 pi) = s e^{-s^2} / 2
    assert radiation_field_free(data, 1.0, [1.0, 0, 0]) == pytest.approx(0.5 * math.exp(-1.0), abs=1e-7)


def test_fourth_order_difference_converges_at_sixteen():
    assert richardson_ratio(np.sin, 0.7, 0.1, exact=math.cos(0.7)) == pytest.approx(16.0, rel=0.02)
    assert fd_derivative(np.exp, 0.0, 1e-3) == pytest.approx(1.0, abs=1e-12)


def test_exterior_field_formula_and_support():
    F = radiation_field_exterior_radial(zero_profile(), canonical_f1())
    ext = CheckExtension(canonical_f1())
    s = np.linspace(-3.0, 5.0, 161)
    np.testing.assert_allclose(F(s), np.where(s < 4.0, -0.5 * ext(s), 0.0), atol=1e-16)
    assert F.lower_support == -2.0
    assert np.all(F(np.array([-2.5, 4.2])) == 0.0)
    assert decay_sup(F, s, 4) > 0


def test_exterior_field_derivatives_and_primitive():
    F = radiation_field_exterior_radial(bump_profile(3.0, 1.0, 0.5), canonical_f1())
    s = np.linspace(-1.5, 3.9, 23)
    h = 1e-5
    np.testing.assert_allclose(F.derivative(s, 1), (F(s + h) - F(s - h)) / (2 * h), atol=1e-7)
    P = F.primitive()
    for x in (-1.0, 0.5, 2.5, 3.5):
        assert P(x) == pytest.approx(-adaptive_quad(F, x, 4.0, tol=1e-13), abs=1e-11)
