import json

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from _factories import random_factor, random_zonal
from confspec.conformal import (
    ConformalFactor,
    CurvatureConstants,
    DegenerateTestFunction,
    InvalidConformalFactor,
    InvalidTestFunction,
    ZonalFunction,
    conformal_constant,
    conformal_energy,
    conformal_energy_tilde,
    l2_tilde,
    m_weighted_l2,
    measure_m_total,
    rayleigh_quotient,
    round_energy,
    volume_total,
)
from confspec.sphere import dilation_conformal_factor, sphere_volume, spherical_to_cartesian
from confspec.testfn import phi_annulus

VOL3 = 2 * np.pi**2
# int omega^4 dnu for the t = 2 dilation factor on S^3, by adaptive quadrature
M_BUBBLE_T2 = 17.545963379714415


@pytest.mark.parametrize("n", [3, 4, 5, 7])
def test_curvature_constants(n):
    c = CurvatureConstants(n)
    assert_allclose(c.c_n, (n - 2) / (4 * (n - 1)))
    assert_allclose(c.c_n * c.scalar_curvature, n * (n - 2) / 4, rtol=1e-15)
    assert_allclose(conformal_constant(n), c.c_n)


def test_measure_examples():
    assert_allclose(measure_m_total(ConformalFactor.constant(3)), VOL3, rtol=1e-14)
    assert_allclose(measure_m_total(ConformalFactor.constant(3, 2.0)), 16 * VOL3, rtol=1e-14)
    assert_allclose(measure_m_total(ConformalFactor.bubble(3, 2.0)), M_BUBBLE_T2, rtol=1e-11)


def test_bubble_mass_oracle():
    t = 2.0

    def s(phi):
        return 2 * t / ((1 - np.cos(phi)) + t * t * (1 + np.cos(phi)))

    ref, _ = quad(lambda phi: s(phi) ** 2 * np.sin(phi) ** 2, 0, np.pi, epsabs=1e-14, limit=200)
    assert_allclose(4 * np.pi * ref, M_BUBBLE_T2, rtol=1e-12)


def test_bubble_is_dilation_pullback():
    mu = ConformalFactor.bubble(3, 2.5)
    ang = np.column_stack([np.linspace(0.01, 3.13, 40), np.full(40, 0.3), np.full(40, 1.1)])
    X = spherical_to_cartesian(ang)
    assert_allclose(mu.of_point(X), dilation_conformal_factor(np.eye(4)[0], 2.5, X), rtol=1e-13)
    assert_allclose(volume_total(mu), VOL3, rtol=1e-12)


@pytest.mark.parametrize("c", [0.5, 2.0, 3.0])
def test_measure_scaling(c):
    for n in (3, 4, 5):
        assert_allclose(measure_m_total(ConformalFactor.constant(n, c)),
                        c ** (4 / (n - 2)) * sphere_volume(n), rtol=1e-13)


def test_energy_examples():
    one = ConformalFactor.constant(3)
    assert_allclose(conformal_energy(ZonalFunction.reciprocal(one), one), 0.75 * VOL3, rtol=1e-14)
    assert_allclose(conformal_energy(ZonalFunction.constant(1.0), one), 0.75 * VOL3, rtol=1e-14)
    x0 = ZonalFunction.from_polynomial([0.0, 1.0])
    # |grad x0|^2 = sin^2, so the energy is Vol/4 * (3 + 3/4)
    assert_allclose(conformal_energy(x0, one), VOL3 * 3.75 / 4, rtol=1e-14)
    assert_allclose(rayleigh_quotient(x0, one), 3.75, rtol=1e-14)
    assert_allclose(rayleigh_quotient(ZonalFunction.reciprocal(one), one), 0.75, rtol=1e-14)


def test_reciprocal_quotient_is_round_value():
    rng = np.random.default_rng(5)
    for _ in range(5):
        mu = random_factor(rng)
        rq = rayleigh_quotient(ZonalFunction.reciprocal(mu), mu)
        assert_allclose(rq * measure_m_total(mu), 0.75 * VOL3, rtol=1e-11)


def test_denominator_two_paths():
    mu = ConformalFactor.two_bubble(3, 1.7)
    tf = phi_annulus(np.eye(4)[0], 0.4, 1.1)
    a = l2_tilde(tf.zonal.over(mu), mu)
    b = m_weighted_l2(tf.zonal, mu)
    assert_allclose(a, b, rtol=1e-14)


def test_conformal_law_random_pairs():
    rng = np.random.default_rng(11)
    for _ in range(20):
        mu, f = random_factor(rng), random_zonal(rng)
        g_side = conformal_energy(f, mu)
        assert_allclose(conformal_energy_tilde(f, mu), g_side, rtol=1e-10)
        # energy of f on g~ equals the round energy of mu f
        mf = ZonalFunction(lambda phi: mu(np.cos(phi)) * f.value(phi),
                           lambda phi: mu(np.cos(phi)) * f.dphi(phi) - np.sin(phi) * mu.derivatives(np.cos(phi))[1] * f.value(phi))
        assert_allclose(round_energy(mf, 3), g_side, rtol=1e-12)


def test_conformal_law_with_kinks():
    mu = ConformalFactor.bubble(3, 1.8)
    f = phi_annulus(np.eye(4)[0], 0.5, 1.2).zonal
    assert_allclose(conformal_energy_tilde(f, mu), conformal_energy(f, mu), rtol=1e-10)


def test_quotient_scale_invariant():
    rng = np.random.default_rng(2)
    mu, f = random_factor(rng), random_zonal(rng)
    q = rayleigh_quotient(f, mu)
    for c in (-3.0, 1e-3, 7.0):
        assert_allclose(rayleigh_quotient(f.scaled(c), mu), q, rtol=1e-13)


def test_scalar_curvature_tilde():
    # mu = x0-dependent polynomial: check R~ against the conformal law on f = 1
    mu = ConformalFactor.polynomial(3, [1.0, 0.3, -0.2])
    u = np.linspace(-0.99, 0.99, 11)
    h, h1, h2 = mu.derivatives(u)
    lap = (1 - u * u) * h2 - 3 * u * h1
    expected = 8 * (-lap + 0.75 * h) * h ** (-5)
    assert_allclose(mu.scalar_curvature_tilde(u), expected, rtol=1e-13)
    assert_allclose(ConformalFactor.constant(3, 2.0).scalar_curvature_tilde(u), 6 / 16, rtol=1e-14)


def test_invalid_factor_rejected():
    with pytest.raises(InvalidConformalFactor):
        ConformalFactor.polynomial(3, [-1.0, 0.2])
    with pytest.raises(InvalidConformalFactor):
        ConformalFactor.polynomial(3, [0.0, 1.0])
    with pytest.raises(InvalidConformalFactor):
        ConformalFactor.constant(2)


def test_degenerate_and_non_lipschitz():
    one = ConformalFactor.constant(3)
    with pytest.raises(DegenerateTestFunction):
        rayleigh_quotient(ZonalFunction.constant(0.0), one)
    # derivative blowing up at phi = pi/2
    cusp = ZonalFunction(lambda phi: np.sqrt(np.abs(np.cos(phi))),
                         lambda phi: np.where(np.abs(np.cos(phi)) < 0.05, np.inf, 1.0))
    with pytest.raises(InvalidTestFunction):
        conformal_energy(cusp, one)
    with pytest.raises(InvalidTestFunction):
        round_energy(cusp, 3)


def test_serialization_round_trip():
    for mu in (ConformalFactor.constant(3, 2.0), ConformalFactor.polynomial(4, [1.0, 0.1, 0.2]),
               ConformalFactor.bubble(3, 2.0, sign=-1), ConformalFactor.two_bubble(5, 1.5)):
        back = ConformalFactor.from_json(mu.to_json())
        u = np.linspace(-1, 1, 17)
        assert_allclose(back(u), mu(u), rtol=0, atol=0)
        assert back.n == mu.n
        assert json.loads(back.to_json()) == json.loads(mu.to_json())


def test_oscillation():
    assert ConformalFactor.constant(3, 5.0).oscillation() == 0.0
    assert_allclose(ConformalFactor.polynomial(3, [1.0, 0.5]).oscillation(), (1.5 - 0.5) / 1.5, rtol=1e-12)
