import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracfb import analysis as an
from fracfb.grid import Field, GridConfig, build_grid
from fracfb.params import EnergyParams

HALF = EnergyParams(0.5, 0.5)


@pytest.fixture(scope="module")
def grid():
    return build_grid(GridConfig(a=0.0, nx=257, ny=33))


def trace_field(grid, f):
    """Field equal to f(x) on every y level."""
    return Field.from_function(grid, lambda X, Y: f(X))


def test_contact_set_of_zero(grid):
    cs = an.contact_set(Field(grid, np.zeros(grid.shape)), 0.0)
    assert cs.zero_nodes.size == grid.shape[0]
    assert cs.free_boundary.size == 0


@given(st.floats(-0.5, 0.5))
@settings(max_examples=20, deadline=None)
def test_contact_set_power_crossing(x0):
    g = build_grid(GridConfig(a=0.0, nx=129, ny=9))
    u = trace_field(g, lambda X: np.maximum(X - x0, 0) ** (2 / 3))
    cs = an.contact_set(u, 0.0)
    h = 2 / 128
    assert cs.free_boundary.size == 1
    assert abs(cs.free_boundary[0] - x0) <= h


def test_growth_fit_synthetic(grid):
    beta = 2 / 3
    u = trace_field(grid, lambda X: 1.7 * np.maximum(X, 0) ** beta)
    fit = an.optimal_growth_fit(u, 0.0, beta)
    assert fit.beta_hat == pytest.approx(beta, abs=0.02)
    assert fit.ratio_spread == pytest.approx(1.0, abs=1e-12)


def test_growth_fit_uses_sup(grid):
    beta = 0.8
    one = trace_field(grid, lambda X: np.maximum(X, 0) ** beta)
    two = trace_field(grid, lambda X: np.abs(X) ** beta)
    assert np.array_equal(an.optimal_growth_fit(one, 0.0).values, an.optimal_growth_fit(two, 0.0).values)


@given(st.floats(0.2, 1.8), st.floats(0.1, 10.0))
@settings(max_examples=25, deadline=None)
def test_fit_power_law_recovers_exponent(p, c):
    r = np.logspace(-3, 0, 12)
    phat, chat, rsq = an.fit_power_law(r, c * r**p)
    assert phat == pytest.approx(p, abs=1e-10)
    assert chat == pytest.approx(c, rel=1e-9)


def test_chain_synthetic(grid):
    u = trace_field(grid, lambda X: np.maximum(X + 0.4, 0) ** (2 / 3))
    chain, rep = an.nondegeneracy_chain(u, -0.4, theta=0.0)
    assert rep.passed and rep.constant_hat > 0
    assert len(chain) >= 2


def test_chain_of_zero(grid):
    chain, rep = an.nondegeneracy_chain(Field(grid, np.zeros(grid.shape)), 0.0)
    assert chain == [] and not rep.passed
    assert "degenerate" in rep.worst_case


def test_growth_at_distance_synthetic(grid):
    beta, c = 2 / 3, 2.0
    u = trace_field(grid, lambda X: c * np.maximum(X, 0) ** beta)
    rep = an.growth_at_distance(u, 0.5, beta, 0.0)
    r = rep.details["r"]
    expected = c * (0.5 + r / 4) ** beta / r**beta
    assert rep.constant_hat == pytest.approx(expected, rel=1e-3)
    assert rep.constant_hat >= (3 / 4) ** beta * c


def test_growth_at_distance_zero(grid):
    rep = an.growth_at_distance(Field(grid, np.zeros(grid.shape)), 0.2, 0.5, 0.0)
    assert rep.constant_hat == 0.0 and not rep.passed


def test_density_half_line(grid):
    u = trace_field(grid, lambda X: np.maximum(X, 0) ** 0.7)
    rep = an.positivity_density(u, 0.0, [0.05, 0.1, 0.2, 0.4], 0.0)
    assert np.allclose(rep.details["fractions"], 0.5, atol=1e-12)
    assert rep.passed


def test_density_zero(grid):
    rep = an.positivity_density(Field(grid, np.zeros(grid.shape)), 0.0, [0.1, 0.2], 0.0)
    assert rep.constant_hat == 0.0 and not rep.passed


def test_gradients_of_constant(grid):
    rep = an.gradient_bound_checks(Field(grid, np.full(grid.shape, 2.0)), HALF, 0.0)
    d = rep.details
    assert max(d["y_grad_over_u"], d["trace_gradient"], d["vertical_growth"]) < 1e-12


def test_gradients_of_y_power():
    p = EnergyParams(0.3, 0.5)
    g = build_grid(GridConfig(a=p.a, nx=65, ny=65))
    u = Field.from_function(g, lambda X, Y: Y ** (2 * p.sigma))
    rep = an.gradient_bound_checks(u, p, 0.0, window=1.0)
    assert math.isfinite(rep.constant_hat) and rep.passed


def test_holder_norm_of_power(grid):
    beta = 2 / 3
    u = trace_field(grid, lambda X: np.abs(X) ** beta)
    assert an.holder_norm(u, beta) == pytest.approx(1.0, abs=0.02)


def test_holder_norm_of_constant(grid):
    assert an.holder_norm(Field(grid, np.ones(grid.shape)), 0.5) == 0.0


@given(st.floats(0.1, 0.9))
@settings(max_examples=10, deadline=None)
def test_holder_norm_monotone_in_exponent(e):
    g = build_grid(GridConfig(a=0.0, nx=65, ny=9))
    u = Field.from_function(g, lambda X, Y: np.sin(3 * X))
    assert an.holder_norm(u, e) <= an.holder_norm(u, e + 0.05) + 1e-12


def test_hopf_exponents():
    for sigma, lo, hi in ((0.5, 0.4, 0.6), (0.75, 0.65, 0.85)):
        rep = an.hopf_probe(EnergyParams(sigma, 0.5), nx=129, ny=65)
        assert lo <= rep.constant_hat <= hi


def test_hopf_inapplicable():
    rep = an.hopf_probe(HALF, nx=65, ny=33, half_interval=2.0)
    assert rep.details["inapplicable"] and not rep.passed


def test_boundary_harnack_probe():
    rep = an.boundary_harnack_probe(HALF, 20)
    assert math.isfinite(rep.constant_hat) and rep.constant_hat >= 1.0
    with pytest.raises(ValueError):
        an.boundary_harnack_probe(HALF, 5)


def test_harnack_probe():
    rep = an.harnack_probe(HALF, 20)
    assert rep.constant_hat > 0 and rep.details["rsq"] > 0.9
    assert rep.details["monotone"]


def test_oscillation_probe():
    rep = an.oscillation_probe(HALF, trials=20)
    mu = rep.details["mu"]
    assert mu[0.25] < 0.99
    assert rep.details["decreasing"]


def test_poincare_probe():
    a = an.poincare_probe(HALF, eps=0.25)
    b = an.poincare_probe(HALF, eps=0.5)
    assert math.isfinite(a.constant_hat) and a.constant_hat > 0
    assert b.constant_hat <= a.constant_hat * 1.05


# -- computed minimizers (129 x 65, free boundary centred at the origin) ----------------


def test_minimizer_contact_set(centred):
    p, res, amp, x0 = centred()
    cs = an.contact_set(res.u, res.theta)
    assert cs.zero_nodes.size > 0 and cs.free_boundary.size >= 1
    assert abs(x0) < 0.02


def test_minimizer_chain_and_density(centred):
    p, res, amp, x0 = centred()
    chain, rep = an.nondegeneracy_chain(res.u, x0, theta=res.theta)
    assert rep.passed and rep.constant_hat >= 0.02
    assert len(chain) <= 41
    x = res.u.grid.x_nodes[0]
    radii = an.dyadic_radii(float(x[1] - x[0]), 0.5)
    assert an.positivity_density(res.u, x0, radii, res.theta).passed


def test_minimizer_growth_scale_invariant(centred):
    p, res, amp, x0 = centred()
    taus = [an.growth_at_distance(res.u, x0 + r, p.beta, res.theta).constant_hat for r in (1 / 8, 1 / 4, 1 / 2)]
    assert min(taus) > 0 and max(taus) / min(taus) < 4


def test_minimizer_gradient_statistics(centred):
    stats = []
    for nx, ny in ((129, 65), (257, 129)):
        p, res, amp, x0 = centred(0.5, 0.5, nx, ny)
        rep = an.gradient_bound_checks(res.u, p, res.theta)
        assert rep.passed
        stats.append(rep.details)
    for key in ("trace_gradient", "vertical_growth"):
        assert stats[1][key] / stats[0][key] == pytest.approx(1.0, abs=0.3)


def test_opt_reg_pipeline_small():
    res = an.opt_reg_pipeline(HALF, nx=129, ny=65, blowups=3, min_radii=3)
    assert abs(res.beta_hat - res.beta) < 0.1 and res.rsq > 0.95
