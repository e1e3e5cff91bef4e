from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate, stats

from orthocs import replica as rp
from orthocs.model import Field, SignalPrior, sample_signal, standard_normal

ZETAS = [2e-4, 9e-4, 1.1e-3, 0.01, 0.1, 1.0, 7.5, 100.0]


def gc_quad(z):
    # |y| of a circular complex Gaussian with variance z is Rayleigh
    f = lambda t: (t - 0.5) ** 2 * 2 * t / z * np.exp(-t * t / z)  # noqa: E731
    return integrate.quad(f, 0.5, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]


def gr_quad(z):
    f = lambda t: (t - 1) ** 2 * 2 * np.exp(-t * t / (2 * z)) / np.sqrt(2 * np.pi * z)  # noqa: E731
    return integrate.quad(f, 1, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]


@pytest.mark.parametrize("z", ZETAS)
def test_g_complex_matches_quadrature(z):
    ref = gc_quad(z)
    if ref > 1e-290:
        assert rp.g_c(z) == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("z", [1e-3, 2e-3, 0.01, 0.1, 1.0, 7.5, 100.0])
def test_g_real_matches_quadrature(z):
    assert rp.g_r(z) == pytest.approx(gr_quad(z), rel=1e-6)


@pytest.mark.parametrize("z", [0.02, 0.1, 1.0, 7.5, 100.0])
def test_derivatives_by_central_difference(z):
    h = 1e-5 * z
    fd_c = (rp.g_c(z + h) - rp.g_c(z - h)) / (2 * h)
    fd_r = (rp.g_r(z + h) - rp.g_r(z - h)) / (2 * h)
    assert rp.g_c_prime(z) == pytest.approx(fd_c, rel=1e-6)
    assert rp.g_r_prime(z) == pytest.approx(fd_r, rel=1e-6)


def test_derivative_identities_by_quadrature():
    # integrating the derivative must recover the increment of g
    for g, gp in ((rp.g_c, rp.g_c_prime), (rp.g_r, rp.g_r_prime)):
        val = integrate.quad(lambda t: float(gp(t)), 0.05, 2.0, epsabs=0, epsrel=1e-12)[0]
        assert val == pytest.approx(g(2.0) - g(0.05), rel=1e-8)


def test_small_argument_branch_is_continuous():
    lo, hi = rp._SERIES_CUTOFF * (1 - 1e-9), rp._SERIES_CUTOFF * (1 + 1e-9)
    assert rp.g_c(lo) == pytest.approx(rp.g_c(hi), rel=1e-8)
    assert rp.g_r(lo) == pytest.approx(rp.g_r(hi), rel=1e-8)


def test_g_limits_and_errors():
    assert rp.g_c(1e-301) == 0.0
    assert rp.g_c_prime(1e6) == pytest.approx(1.0, abs=1e-3)
    np.testing.assert_allclose(rp.g_c(np.array([0.1, 1.0])), [rp.g_c(0.1), rp.g_c(1.0)])
    for fn in (rp.g_c, rp.g_c_prime, rp.g_r, rp.g_r_prime):
        with pytest.raises(ValueError):
            fn(0.0)
        with pytest.raises(ValueError):
            fn(-1.0)


def test_q_function():
    x = np.linspace(-5, 8, 27)
    np.testing.assert_allclose(rp.q_function(x), stats.norm.sf(x), rtol=1e-12)


@pytest.mark.parametrize("field", [Field.COMPLEX, Field.REAL])
def test_scalar_channel_against_monte_carlo(field):
    m_hat, chi_hat, rho = 1.3, 0.2, 0.2
    n = 400_000
    rng = np.random.default_rng(11)
    x0 = sample_signal(SignalPrior(rho, field), n, rng)
    y = m_hat * x0 + np.sqrt(chi_hat) * standard_normal(rng, n, field)
    xh = rp.scalar_channel_estimate(y, m_hat, field)
    m, q, mse = rp.scalar_channel_mse(m_hat, chi_hat, rho, 1.0, 1.0, field)
    for sample, expected in (((np.conj(xh) * x0).real, m), (np.abs(xh) ** 2, q), (np.abs(xh - x0) ** 2, mse)):
        se = np.std(sample) / np.sqrt(n)
        assert abs(np.mean(sample) - expected) < 4 * se


def test_single_block_closed_forms_match_row_solver():
    lam, nu, R = 0.1, 0.375, 4 / 3
    for chi in (0.005, 0.02, 0.05, 0.2):
        m_hat, gam, dgam = rp.type_b_closed_forms(chi, lam, nu, R)
        g, d = rp.solve_row_block(np.array([chi]), nu, np.array([R]), lam)
        assert gam == pytest.approx(g[0], rel=1e-10)
        assert m_hat == pytest.approx(d[0] / chi, rel=1e-10)
        h = chi * 1e-6
        gp = rp.solve_row_block(np.array([chi + h]), nu, np.array([R]), lam)[0][0]
        gm = rp.solve_row_block(np.array([chi - h]), nu, np.array([R]), lam)[0][0]
        assert dgam == pytest.approx((gp - gm) / (2 * h), rel=1e-6)


def test_gamma_derivative_matches_finite_difference():
    chi = np.array([0.02, 0.05, 0.03])
    gains = np.array([0.5, 0.4, 0.3])
    nu, lam = 0.8, 0.1
    g, d = rp.solve_row_block(chi, nu, gains, lam)
    jac = rp.gamma_derivative(g, d, nu)
    for r in range(3):
        e = np.zeros(3)
        e[r] = chi[r] * 1e-6
        gp = rp.solve_row_block(chi + e, nu, gains, lam)[0]
        gm = rp.solve_row_block(chi - e, nu, gains, lam)[0]
        np.testing.assert_allclose(jac[:, r], (gp - gm) / (2 * e[r]), rtol=1e-5)


def test_row_block_equations_satisfied():
    chi = np.array([0.02, 0.05])
    gains = np.array([0.7, 0.0])
    g, d = rp.solve_row_block(chi, 0.9, gains, 0.1)
    s = np.sum(gains / g)
    np.testing.assert_allclose(d, 0.9 * gains / g / (0.1 + s), rtol=1e-12)
    np.testing.assert_allclose(g, (1 - d) / chi, rtol=1e-12)
    assert d[1] == 0 and np.all(d < 0.5)


def test_row_block_infeasible_raises():
    with pytest.raises(rp.ReplicaError):
        rp.solve_row_block(np.array([50.0]), 1.0, np.array([1.0]), 0.1)


def test_general_solver_agrees_with_closed_form():
    sb = rp.solve_type_b(0.5, 0.75, lam=0.1, sigma0_sq=1e-2, rho_x=0.15)
    sg = rp.solve_general(rp.ReplicaSpec((0.375,), (0.75,), ((4 / 3,),), 0.1, 1e-2, 0.15))
    assert sb.converged and sg.converged
    assert sb.total_mse == pytest.approx(sg.total_mse, rel=1e-8)
    assert rp.fixed_point_residual(sg) < 1e-9


@pytest.mark.parametrize("mu,nu,lc", [(1.0, 0.25, 4), (0.6, 0.3, 3)])
def test_horizontal_concatenation_equivalence(mu, nu, lc):
    sb = rp.solve_type_b(nu / mu, mu, nu, lam=0.1, sigma0_sq=1e-2, rho_x=0.15)
    spec = rp.ReplicaSpec((lc * nu,), (mu,) * lc, ((1.0 / (lc * mu),) * lc,), 0.1, 1e-2, 0.15)
    sg = rp.solve_general(spec)
    assert abs(sb.total_mse - sg.total_mse) <= 1e-8 * sb.total_mse


def test_block_reordering_invariance():
    a = rp.ReplicaSpec((1.0,), (1.0, 0.5), ((1 / 1.5, 1 / 1.5),), 0.1, 1e-2, 0.15)
    b = rp.ReplicaSpec((1.0,), (0.5, 1.0), ((1 / 1.5, 1 / 1.5),), 0.1, 1e-2, 0.15)
    sa, sb = rp.solve_general(a), rp.solve_general(b)
    assert sa.total_mse == pytest.approx(sb.total_mse, rel=1e-9)
    np.testing.assert_allclose(sa.chi, sb.chi[::-1], rtol=1e-8)


def test_mse_non_increasing_in_mu():
    vals = [rp.solve_type_b(0.5, mu, lam=0.1, sigma0_sq=1e-2, rho_x=0.15).total_mse for mu in (0.1, 0.25, 0.5, 0.75, 1.0)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_multistart_finds_single_fixed_point():
    spec = rp.ReplicaSpec((0.5,), (0.75,), ((4 / 3,),), 0.1, 0.1, 0.15)
    inits = [(np.array([c]), np.array([h])) for c in (0.001, 0.01, 0.05) for h in (0.01, 0.1, 1.0)]
    found = rp.find_fixed_points(spec, inits)
    assert len(found) == 1
    assert found[0].total_mse_db == pytest.approx(-10.4455, abs=1e-3)


def test_type_a_scaling_modes():
    pn = rp.solve_type_a(0.5, lam=0.1, sigma0_sq=1e-2, rho_x=0.15)
    lg = rp.solve_type_a(0.5, legacy_scale=True, lam=0.1, sigma0_sq=1e-2, rho_x=0.15)
    assert pn.total_mse_db == pytest.approx(-19.108, abs=1e-3)
    assert pn.total_mse != pytest.approx(lg.total_mse, rel=1e-3)


def test_real_field_uses_half_lambda_channel():
    real = rp.ReplicaSpec((0.375,), (0.75,), ((4 / 3,),), 0.2, 1e-2, 0.15, Field.REAL)
    assert real.channel_lam == pytest.approx(0.1)
    sol = rp.solve_general(real)
    assert sol.converged and rp.fixed_point_residual(sol) < 1e-9


def test_spec_validation():
    with pytest.raises(ValueError):
        rp.ReplicaSpec((0.5,), (1.0,), ((1.0, 1.0),), 0.1, 0.01, 0.1)
    with pytest.raises(ValueError):
        rp.ReplicaSpec((0.5,), (1.0,), ((1.0,),), 0.0, 0.01, 0.1)
    with pytest.raises(ValueError):
        rp.ReplicaSpec((0.5,), (1.0, 1.0), ((1.0, 0.0),), 0.1, 0.01, 0.1)
    with pytest.raises(ValueError):
        rp.solve_type_b(0.5, 0.75, 0.5, lam=0.1, sigma0_sq=0.01, rho_x=0.1)


def test_discriminant_guard():
    # D >= 0 whenever nu <= 1; a forced nu > 1 can make it negative
    with pytest.raises(rp.ReplicaError):
        rp.type_b_closed_forms(0.1, 0.1, 5.0, 1.0)
