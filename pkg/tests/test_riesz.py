import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fracfb import riesz
from fracfb.analysis import InsufficientDataError
from fracfb.params import EnergyParams

HALF = EnergyParams(0.5, 0.5)
gauss = lambda z: np.exp(-np.asarray(z, float) ** 2)


def test_psi_values():
    psi = riesz.psi_barrier(HALF, n=1)
    assert psi.exponent == pytest.approx(-1 / 3, abs=1e-15)
    assert float(psi(0.0)) == -1.0
    assert np.all(psi(np.array([1 / 3, 0.5, 2.0])) == 0.0)


def test_psi_l1_norm():
    psi = riesz.psi_barrier(HALF, n=1)
    assert riesz.psi_l1_closed_form(HALF) == pytest.approx(1.0, abs=1e-14)
    assert riesz.l1_norm(psi) == pytest.approx(1.0, abs=1e-8)


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
@settings(max_examples=15, deadline=None)
def test_psi_l1_norm_property(s, g):
    p = EnergyParams(s, g)
    assert riesz.l1_norm(riesz.psi_barrier(p, n=1)) == pytest.approx(riesz.psi_l1_closed_form(p), rel=1e-8)


def test_riesz_of_zero():
    f = riesz.smooth_profile(lambda r: 0.0 * r, 1.0)
    assert riesz.riesz_potential(f, 0.3, 0.2) == 0.0


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_riesz_indicator_3d(R):
    v = riesz.riesz_potential(riesz.indicator_profile(R, 3), 0.5, 0.0)
    assert v == pytest.approx(2 * R / math.pi, rel=1e-6)


def test_riesz_indicator_1d_against_quadrature():
    s, x, R = 0.3, 0.2, 1.0
    c = riesz.riesz_constant(1, s)
    ref = sum(integrate.quad(lambda z: abs(x - z) ** (2 * s - 1), a, b, epsabs=1e-13)[0]
              for a, b in ((-R, x), (x, R)))
    assert riesz.riesz_potential(riesz.indicator_profile(R, 1), s, x) == pytest.approx(c * ref, rel=1e-7)


def test_riesz_flags_growth_variant():
    out = riesz.riesz_potential(riesz.indicator_profile(1.0, 1), 0.75, 0.1, detail=True)
    assert out.flagged and math.isfinite(out.value)
    out = riesz.riesz_potential(riesz.indicator_profile(1.0, 1), 0.3, 0.1, detail=True)
    assert not out.flagged


def test_constants():
    assert riesz.frac_laplacian_constant(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-14)
    assert riesz.riesz_constant(3, 0.5) == pytest.approx(1 / (2 * math.pi**2), rel=1e-14)
    assert riesz.riesz_constant(1, 0.75) < 0
    with pytest.raises(riesz.AnalyticDomainError):
        riesz.riesz_constant(1, 0.5)


def test_frac_laplacian_of_constant():
    assert riesz.frac_laplacian(lambda z: np.ones_like(np.asarray(z, float)), 0.4, 0.3) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("sigma", [0.3, 0.5, 0.8])
def test_frac_laplacian_gaussian(sigma):
    v = riesz.frac_laplacian(gauss, sigma, 0.0)
    assert v == pytest.approx(riesz.spectral_frac_laplacian_gaussian(0.0, sigma), rel=1e-4)


def test_frac_laplacian_linear():
    g = lambda z: 1.0 / (1.0 + np.asarray(z, float) ** 2)
    h = lambda z: 2 * gauss(z) + g(z)
    x, s = 0.4, 0.35
    lhs = riesz.frac_laplacian(h, s, x)
    rhs = 2 * riesz.frac_laplacian(gauss, s, x) + riesz.frac_laplacian(g, s, x)
    assert lhs == pytest.approx(rhs, rel=1e-7)


@pytest.mark.parametrize("sigma", [0.3, 0.5])
def test_inversion_identity(sigma):
    p = EnergyParams(sigma, 0.5)
    psi = riesz.psi_barrier(p, n=1)
    F = riesz.riesz_interpolant(psi, sigma)
    for x in (0.0, 0.15, 0.25, 0.6):
        lap = riesz.frac_laplacian(F, sigma, x, breakpoints=(-1 / 3, 1 / 3, -1, 1), tol=1e-9)
        assert abs(lap - float(psi(x))) <= 0.02 * max(abs(float(psi(x))), 1.0)


def test_interpolant_matches_direct_potential():
    p = EnergyParams(0.3, 0.5)
    psi = riesz.psi_barrier(p, n=1)
    F = riesz.riesz_interpolant(psi, 0.3)
    for x in (0.0, 0.2, 0.5, 1.5, 4.0):
        assert float(F(x)) == pytest.approx(riesz.riesz_potential(psi, 0.3, x), rel=1e-5, abs=1e-8)


def test_maximal_of_zero():
    f = riesz.smooth_profile(lambda r: 0.0 * r, 1.0)
    m = riesz.frac_maximal(f, 0.5, points=[0.0, 0.5])
    assert np.all(m.values == 0)


def test_maximal_of_indicator():
    f = riesz.indicator_profile(1.0, 1)
    m = riesz.frac_maximal(f, 1.0, points=[0.0])
    assert m.values[0] == pytest.approx(2.0, rel=1e-12)
    assert m.meta["argmax_r"][0] >= 1.0 - 1e-12


def test_maximal_of_psi_at_ring_finite():
    psi = riesz.psi_barrier(HALF, n=1)
    sup, arg, vals = riesz.maximal_at_ring(psi, 2 * HALF.sigma - HALF.beta, 1 / 3)
    assert math.isfinite(sup) and sup > 0
    assert arg > 1e-3


def test_holder_fit_synthetic():
    r = (1 - np.logspace(-4, -0.5, 30)) / 3
    fit = riesz.holder_modulus_fit((r, (1 - 3 * r) ** 0.7), 1 / 3, g0=0.0)
    assert fit.alpha_hat == pytest.approx(0.7, abs=0.01)
    assert fit.rsq > 0.999


def test_holder_fit_constant_is_degenerate():
    r = np.linspace(0, 1 / 3, 20)
    fit = riesz.holder_modulus_fit((r, np.full_like(r, 2.0)), 1 / 3)
    assert fit.degenerate


def test_holder_fit_too_few_samples():
    r = np.linspace(0.3, 1 / 3, 4)
    with pytest.raises(InsufficientDataError):
        riesz.holder_modulus_fit((r, r), 1 / 3)


def test_holder_exponent_of_potential_exceeds_sigma():
    psi = riesz.psi_barrier(HALF, n=1)
    d = np.logspace(-4, -1, 12)
    r = (1 - d) / 3
    vals = np.array([riesz.riesz_potential(psi, 0.5, ri) for ri in r])
    fit = riesz.holder_modulus_fit((r, vals), 1 / 3, g0=riesz.riesz_potential(psi, 0.5, 1 / 3))
    assert fit.alpha_hat > HALF.sigma and fit.rsq > 0.95


def test_profile_save(tmp_path):
    files = riesz.psi_barrier(HALF, n=1).save(tmp_path / "psi")
    assert [f.suffix for f in files] == [".csv", ".json"]
    assert (tmp_path / "psi.csv").read_text().startswith("r,value\n")
