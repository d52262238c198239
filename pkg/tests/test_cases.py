"""Consistency of the benchmark cases: manufactured sources solve the
even-parity equation, coefficients and boundary data match their
definitions."""

import numpy as np
import pytest

from slabrank.cases import CASE_IDS, manufactured_case

CS_H = 1e-30  # complex-step increment


def complex_step(f, z):
    return np.imag(f(z + 1j * CS_H)) / CS_H


def strong_form_residual(case, z, mu, n_quad=2000):
    """q - (-mu^2 d/dz(u_z / sigma_t) + sigma_t u - sigma_s <u>) pointwise."""
    mu_q, w_q = np.polynomial.legendre.leggauss(n_quad)
    mu_q = 0.5 * (mu_q + 1.0)
    w_q = 0.5 * w_q
    angular_mean = np.array([w_q @ case.u(zz, mu_q) for zz in z])

    def flux(zz):
        return case.u_z(zz, mu[None, :]) / case.sigma_t(zz)

    dflux = np.vstack([complex_step(flux, zz) for zz in z])
    zc, mc = z[:, None], mu[None, :]
    lhs = (-mc ** 2 * dflux + case.sigma_t(z)[:, None] * case.u(zc, mc)
           - case.sigma_s(z)[:, None] * angular_mean[:, None])
    return case.q(zc, mc) - lhs


@pytest.mark.parametrize("case_id", ["TC1", "TC2_ALG", "TC2_EXP"])
def test_manufactured_source_solves_the_equation(case_id):
    case = manufactured_case(case_id)
    rng = np.random.default_rng(7)
    z = rng.uniform(0.05, 0.95, 8)
    mu = rng.uniform(0.05, 1.0, 8)
    res = strong_form_residual(case, z, mu)
    scale = np.max(np.abs(case.q(z, mu))) + 1.0
    assert np.max(np.abs(res)) <= 1e-8 * scale


@pytest.mark.parametrize("case_id", ["TC1", "TC2_ALG", "TC2_EXP"])
def test_uz_is_the_derivative_of_u(case_id):
    case = manufactured_case(case_id)
    rng = np.random.default_rng(3)
    z = rng.uniform(0.0, 1.0, 10)
    mu = rng.uniform(0.0, 1.0, 10)
    for zz, mm in zip(z, mu):
        du = complex_step(lambda y: case.u(y, mm), zz)
        assert du == pytest.approx(case.u_z(zz, mm), rel=1e-12, abs=1e-12)


def test_tc1_coefficients_and_scattering_gap():
    case = manufactured_case("TC1")
    z = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(case.sigma_t(z),
                               4.0 + 0.5 * np.sin(np.pi * z))
    np.testing.assert_allclose(case.sigma_t(z) - case.sigma_s(z), 3.0)
    assert case.c0 == 3.0
    assert case.eps_default == 1e-7


def test_tc3_three_layer_coefficients():
    case = manufactured_case("TC3")
    # layers split at 0.75 and 0.875; absorption = total - scattering
    z = np.array([0.3, 0.8, 0.95])
    np.testing.assert_allclose(case.sigma_s(z), [36.52, 32.27, 5.20])
    np.testing.assert_allclose(case.sigma_t(z) - case.sigma_s(z),
                               [0.52, 8.31, 0.60])
    assert case.c0 == pytest.approx(0.52)
    assert case.u is None and case.u_z is None
    mu = np.linspace(0.0, 1.0, 5)
    assert np.all(case.q(0.5, mu) == 0.0)
    assert np.all(case.gZ(mu) == 0.0)
    assert case.g0(1.0) == pytest.approx(2.4)
    # inflow profile is even around mu = 1 and nearly flat over (0, 1)
    assert case.g0(0.0) == pytest.approx(2.4 * np.exp(-1.0 / 2500.0))


def test_tc2_variants_differ_in_mode_decay():
    alg = manufactured_case("TC2_ALG")
    exp = manufactured_case("TC2_EXP")
    z, mu = 0.371, 0.642
    assert alg.u(z, mu) != pytest.approx(exp.u(z, mu))
    # high-mode content: the algebraic decay keeps visibly more energy
    fine = np.linspace(0, 1, 2001)
    du_alg = np.diff(alg.u(fine, mu), 2)
    du_exp = np.diff(exp.u(fine, mu), 2)
    assert np.linalg.norm(du_alg) > np.linalg.norm(du_exp)


def test_unknown_case_rejected():
    with pytest.raises(ValueError):
        manufactured_case("TC9")
    assert set(CASE_IDS) == {"TC1", "TC2_ALG", "TC2_EXP", "TC3"}
