import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracfb import barriers as B
from fracfb.energy import minimize
from fracfb.grid import Field, GridConfig, build_grid, trace
from fracfb.params import EnergyParams

GAMMA = 0.5
HALF = EnergyParams(0.5, 0.5)


# -- scalar inequality ------------------------------------------------------------------


def test_phi_psi_at_coincidence():
    assert B.phi_value(1.0, 1.0, GAMMA, 2.0) == pytest.approx(0.0, abs=1e-15)
    assert B.psi_value(1.0, 1.0, GAMMA) == pytest.approx(0.0, abs=1e-15)


def test_phi_psi_values():
    assert B.phi_value(4.0, 1.0, GAMMA, 2.0) == pytest.approx(2.25, rel=1e-14)
    assert B.psi_value(4.0, 1.0, GAMMA) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("gamma", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_dominance_with_m_two(gamma):
    rep = B.phi_psi_dominance(gamma, 2.0)
    assert rep.holds


def test_dominance_fails_for_small_m():
    rep = B.phi_psi_dominance(0.9, 1.0)
    assert not rep.holds and rep.violations > 0


@given(st.floats(0.05, 0.95), st.floats(0.0, 5.0), st.floats(1e-6, 5.0))
@settings(max_examples=200)
def test_dominance_property(gamma, t, d):
    s = t + d
    assert B.phi_value(s, t, gamma, 2.0) >= B.psi_value(s, t, gamma) - 1e-12 * s**gamma


# -- second-order barrier ---------------------------------------------------------------


@pytest.fixture(scope="module")
def ball():
    return B.BallGrid(2, 49)


def test_eta_profile(ball):
    eta = B.eta_profile(ball.r)
    assert np.all((eta >= 0) & (eta <= 1))
    assert np.all(eta[ball.r > 0.75] == 1.0)
    assert np.all(eta[ball.r < 0.5] == 0.0)


def test_zero_data_not_cleared(ball):
    b = B.build_barrier_2nd(lambda d: np.zeros(d.shape[:-1]), GAMMA, ball)
    assert np.all(b.w3 == 0)
    assert not b.cleared
    assert np.array_equal(b.w, b.w1 + b.w2 + b.w3)


@pytest.fixture(scope="module")
def cleared(ball):
    return B.build_barrier_2nd(lambda d: np.full(d.shape[:-1], 1000.0), GAMMA, ball)


def test_large_data_clears(cleared):
    assert cleared.cleared
    assert cleared.conditions["w_center"] > 0
    rep = B.verify_subsolution_2nd(cleared, GAMMA)
    assert rep.passed and rep.first_failure is None


def test_zero_field_subsolution(ball):
    rep = B.verify_subsolution_2nd(np.zeros(ball.shape), GAMMA, grid=ball)
    assert rep.passed


def test_halved_lambda_fails_near_boundary(ball, cleared):
    b = B.build_barrier_2nd(lambda d: np.full(d.shape[:-1], 1000.0), GAMMA, ball, lam=cleared.lam / 2)
    rep = B.verify_subsolution_2nd(b, GAMMA)
    assert not rep.passed
    assert rep.first_failure is not None


def test_clearing_threshold_brackets(ball):
    shape = lambda d: 1.0 + 0.5 * d[..., 0]
    A = B.clearing_threshold(shape, GAMMA, ball)
    assert B.build_barrier_2nd(lambda d: A * shape(d), GAMMA, ball).cleared
    assert not B.build_barrier_2nd(lambda d: 0.5 * A * shape(d), GAMMA, ball).cleared


def test_bulk_comparison(ball, cleared):
    m = B.minimize_bulk(ball, lambda d: np.full(d.shape[:-1], 1000.0), GAMMA)
    rep = B.verify_comparison(m.u, cleared.w, m.theta, grid=ball)
    assert rep.passed
    assert m.u[ball.r < 0.1].min() > 0


def test_fundamental_solution_3d():
    g = B.BallGrid(3, 25)
    b = B.build_barrier_2nd(lambda d: np.full(d.shape[:-1], 1000.0), GAMMA, g)
    chk = B.fundamental_solution_check(b)
    assert chk.passed


def test_comparison_with_zero_barrier(ball):
    u = np.abs(np.random.default_rng(0).normal(size=ball.shape))
    assert B.verify_comparison(u, np.zeros(ball.shape), 0.0, grid=ball).passed


# -- fractional barrier -----------------------------------------------------------------


@pytest.fixture(scope="module")
def base():
    return B.build_frac_base(HALF)


def test_base_invariants(base):
    assert np.all(base.w_tilde.values <= 0)
    assert np.all(base.w_tilde(np.array([0.34, 0.5, 1.0])) == 0)
    assert base.q0 > 0 and base.hopf_c > 0


def test_w1_flux(base):
    assert B.flux_of_w1_error(base) < 0.05


@pytest.mark.parametrize("c0,ok", [(1.0, False), (1000.0, True)])
def test_frac_subsolution(base, c0, ok):
    b = B.build_barrier_frac(HALF, c0, base=base)
    assert b.invariants["Q_dominates_w1"]
    rep = B.verify_subsolution_frac(b, HALF)
    assert rep.passed is ok
    if ok:
        assert b.invariants["w_nonnegative"]
        assert b.boundary_ratio > b.lam


def test_frac_threshold_and_comparison(base):
    th = B.find_c0_threshold(HALF, base=base)
    assert th.monotone and th.fails_below
    c0 = th.c0_hat
    bundle = B.build_barrier_frac(HALF, c0, base=base)
    res = minimize(base.grid, lambda X, Y: c0 * B.default_boundary_shape(X, Y), HALF)
    comp = B.verify_comparison(res.u, bundle.w, res.theta, params=HALF)
    assert comp.passed
    assert comp.energy_max >= comp.energy_u - 1e-9 * abs(comp.energy_u)
    x, tr = trace(res.u)
    assert np.all(tr[np.abs(x) < 1 / 3] > res.theta)


def test_grid_mismatch(base):
    other = build_grid(GridConfig(a=0.0, nx=17, ny=9))
    with pytest.raises(B.GridMismatchError):
        B.verify_comparison(Field(other, np.zeros(other.shape)), base.w1, 0.0)


def test_bundle_save(tmp_path, base):
    files = B.build_barrier_frac(HALF, 100.0, base=base).save(tmp_path / "bundle")
    assert (tmp_path / "bundle" / "report.json").exists()
    assert all(f.exists() for f in files)
