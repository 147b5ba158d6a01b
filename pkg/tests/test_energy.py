import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracfb.analysis import contact_set, ramp_data
from fracfb.energy import MinimizeOpts, continuation_bound_holds, el_residual, eval_energy, minimize
from fracfb.grid import Field, GridConfig, build_grid, trace
from fracfb.params import EnergyParams
from fracfb.scaling import energy_scaling_check

P = EnergyParams(0.5, 0.5)


@pytest.fixture(scope="module")
def grid():
    return build_grid(GridConfig(a=P.a, nx=129, ny=65))


def test_energy_of_zero(grid):
    e = eval_energy(Field(grid, np.zeros(grid.shape)), P)
    assert (e.dirichlet, e.penalty, e.total) == (0.0, 0.0, 0.0)


@given(st.floats(1e-3, 100.0))
@settings(max_examples=20, deadline=None)
def test_energy_of_constant(c):
    g = build_grid(GridConfig(a=0.0, nx=33, ny=17))
    e = eval_energy(Field(g, np.full(g.shape, c)), P)
    assert abs(e.dirichlet) < 1e-10 * c * c
    assert e.penalty == pytest.approx(2 * np.sqrt(c), rel=1e-12)
    assert e.total == e.dirichlet + e.penalty


def test_dirichlet_energy_of_linear_profile():
    # u = y at sigma = 1/2: the Dirichlet integral is 1/2 * |[-1,1] x [0,1]| = 1
    g = build_grid(GridConfig(a=0.0, nx=33, ny=33))
    e = eval_energy(Field.from_function(g, lambda X, Y: Y), P)
    assert e.dirichlet == pytest.approx(1.0, abs=1e-8)
    assert e.penalty == 0.0


def test_weighted_dirichlet_energy():
    # u = y^(2 sigma) has y^a u_y^2 = (2 sigma)^2 y^(2 sigma - 1); integral over the box is 2 * 2 sigma
    p = EnergyParams(0.3, 0.5)
    g = build_grid(GridConfig(a=p.a, nx=17, ny=257))
    e = eval_energy(Field.from_function(g, lambda X, Y: Y ** (2 * p.sigma)), p)
    assert e.dirichlet == pytest.approx(0.5 * 2 * (2 * p.sigma) ** 2 / (2 * p.sigma), rel=1e-10)


def test_zero_data_gives_zero(grid):
    res = minimize(grid, 0.0, P)
    assert np.all(res.u.values == 0)
    assert res.energy.total == 0.0
    assert res.el_report.vacuous


def test_el_of_zero_is_vacuous(grid):
    rep = el_residual(Field(grid, np.zeros(grid.shape)), P)
    assert rep.vacuous and rep.interior_residual == 0.0
    assert rep.active_set_size == int(grid.gamma_mask.sum())


def test_el_of_y_power_is_vacuous(grid):
    u = Field.from_function(grid, lambda X, Y: Y ** (2 * P.sigma))
    rep = el_residual(u, P, theta=1e-12)
    assert rep.vacuous


@pytest.fixture(scope="module")
def ramp_min(grid):
    return minimize(grid, ramp_data(1.0), P)


def test_ramp_minimizer_properties(grid, ramp_min):
    res = ramp_min
    assert np.all(res.u.values >= 0)
    e = res.energy
    assert e.total == e.dirichlet + e.penalty
    assert res.el_report.gamma_residual < MinimizeOpts().gamma_tol
    assert res.el_report.interior_residual < 1e-6
    assert res.el_report.gamma_residual_opposite > 1.0
    assert continuation_bound_holds(res, float(np.sum(grid.gamma_weights)), P.gamma)
    cs = contact_set(res.u, res.theta)
    assert cs.zero_nodes.size > 0 and cs.free_boundary.size >= 1


def test_trace_consistent_with_contact_set(ramp_min):
    x, tr = trace(ramp_min.u)
    cs = contact_set(ramp_min.u, ramp_min.theta)
    assert np.array_equal(np.flatnonzero(tr <= ramp_min.theta), np.asarray(cs.zero_nodes))


def test_minimizer_beats_perturbations(grid, ramp_min):
    rng = np.random.default_rng(1)
    base = eval_energy(ramp_min.u, P).total
    inner = grid.interior_mask | grid.gamma_mask
    for _ in range(5):
        bump = np.where(inner, rng.normal(scale=1e-3, size=grid.shape), 0.0)
        v = Field(grid, np.maximum(ramp_min.u.values + bump, 0.0))
        assert eval_energy(v, P).total >= base - 1e-9


def test_large_data_clears_gamma():
    g = build_grid(GridConfig(a=P.a, nx=65, ny=33))
    res = minimize(g, lambda X, Y: 100.0 * np.ones_like(X), P)
    x, tr = trace(res.u)
    assert np.all(tr[1:-1] > res.theta)


def test_energy_scaling_of_minimizer(centred):
    errs = []
    for nx, ny in ((129, 65), (257, 129)):
        p, res, amp, x0 = centred(0.5, 0.5, nx, ny)
        chk = energy_scaling_check(res.u, 0.5, p, center=x0)
        errs.append(max(abs(chk.dirichlet_factor / chk.predicted[0] - 1),
                        abs(chk.penalty_factor / chk.predicted[1] - 1)))
    assert errs[0] < 0.05 and errs[1] < 0.02
