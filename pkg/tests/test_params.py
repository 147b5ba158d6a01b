import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracfb.grid import DomainCoverageError, Field, GridConfig, build_grid
from fracfb.params import EnergyParams, ParameterDomainError, scaling_exponent
from fracfb.scaling import energy_scaling_check, rescale_field

unit = st.floats(min_value=1e-3, max_value=1 - 1e-3)


@pytest.mark.parametrize("sigma,gamma,expected", [(0.5, 0.5, 2 / 3), (0.75, 0.5, 1.0), (0.5, 0.25, 4 / 7)])
def test_scaling_exponent_values(sigma, gamma, expected):
    assert scaling_exponent(sigma, gamma) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("sigma,gamma", [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0), (-0.1, 0.5), (0.5, 1.5)])
def test_parameter_domain_rejected(sigma, gamma):
    with pytest.raises(ParameterDomainError):
        EnergyParams(sigma, gamma)
    with pytest.raises(ParameterDomainError):
        scaling_exponent(sigma, gamma)


def test_half_half_exponents_are_minus_one_third():
    d, p = EnergyParams(0.5, 0.5, 1).energy_exponents()
    assert d == pytest.approx(-1 / 3, abs=1e-15)
    assert p == pytest.approx(-1 / 3, abs=1e-15)


@given(unit, unit, st.integers(1, 3))
def test_derived_fields(sigma, gamma, n):
    p = EnergyParams(sigma, gamma, n)
    assert p.a == 1 - 2 * sigma and -1 < p.a < 1
    assert p.beta == 2 * sigma / (2 - gamma) and 0 < p.beta < 2
    assert p.beta2nd == 2 / (2 - gamma) and 1 < p.beta2nd < 2
    assert -sigma < p.psi_exponent < 0


@given(unit, unit, st.integers(1, 3))
def test_exponents_agree(sigma, gamma, n):
    p = EnergyParams(sigma, gamma, n)
    d, q = p.energy_exponents()
    jd, jq = p.jacobian_exponents()
    assert abs(d - q) <= 1e-12 and abs(jd - jq) <= 1e-12


def test_exponents_agree_on_20x20_grid():
    vals = np.linspace(0.025, 0.975, 20)
    worst = max(abs(np.subtract(*EnergyParams(s, g).energy_exponents())) for s in vals for g in vals)
    assert worst <= 1e-12


@given(unit, unit, unit)
def test_scaling_exponent_monotone(s, g, t):
    lo, hi = sorted((s, t))
    if hi - lo > 1e-9:
        assert scaling_exponent(lo, g) < scaling_exponent(hi, g)
        assert scaling_exponent(g, lo) < scaling_exponent(g, hi)


@pytest.fixture(scope="module")
def box():
    return build_grid(GridConfig(a=0.0, nx=65, ny=33))


def test_rescale_identity(box):
    u = Field.from_function(box, lambda X, Y: np.sin(X) + Y**2)
    v = rescale_field(u, 1.0, 0.7)
    assert np.array_equal(u.values, v.values)


def test_rescale_homogeneous_profile(box):
    beta = 2 / 3
    u = Field.from_function(box, lambda X, Y: (X**2 + Y**2) ** (beta / 2))
    v = rescale_field(u, 0.5, beta)
    inner = (np.abs(box.coords[0]) <= 0.5) & (box.coords[1] <= 0.5)
    assert np.max(np.abs(v.values - u.values)[inner]) < 0.05


def test_rescale_composition(box):
    u = Field.from_function(box, lambda X, Y: np.cos(2 * X) * (1 + Y))
    twice = rescale_field(rescale_field(u, 0.5, 0.5), 0.5, 0.5)
    once = rescale_field(u, 0.25, 0.5)
    X, Y = box.coords
    inner = (np.abs(X) <= 0.75) & (Y <= 0.75)
    tol = 2 * 4 * (2 / 64) ** 2 * 2 ** 0.5  # twice the bilinear error bound of the scaled field
    assert np.max(np.abs(twice.values - once.values)[inner]) < tol


def test_rescale_matches_direct_evaluation(box):
    u = Field.from_function(box, lambda X, Y: np.exp(X) * (1 + Y) ** 2)
    v = rescale_field(u, 0.5, 0.4)
    rng = np.random.default_rng(0)
    pts = rng.uniform([-1, 0], [1, 1], size=(25, 2))
    direct = 0.5 ** (-0.4) * np.exp(0.5 * pts[:, 0]) * (1 + 0.5 * pts[:, 1]) ** 2
    assert np.max(np.abs(v.evaluate(pts) - direct) / direct) < 1e-2


def test_rescale_rejects_bad_lambda(box):
    u = Field(box, np.zeros(box.shape))
    with pytest.raises(ParameterDomainError):
        rescale_field(u, 0.0, 0.5)
    with pytest.raises(DomainCoverageError):
        rescale_field(u, 2.0, 0.5)


def test_energy_scaling_lambda_one(box):
    p = EnergyParams(0.5, 0.5)
    u = Field.from_function(box, lambda X, Y: 1 + X + Y**2)
    chk = energy_scaling_check(u, 1.0, p)
    assert chk.dirichlet_factor == pytest.approx(1.0, rel=1e-12)
    assert chk.penalty_factor == pytest.approx(1.0, rel=1e-12)
    assert chk.predicted == (1.0, 1.0)


@pytest.mark.parametrize("sigma", [0.3, 0.5, 0.7])
def test_energy_scaling_of_homogeneous_field(sigma):
    # v = u for a degree-beta homogeneous u, so the factors are the exact Jacobian powers
    p = EnergyParams(sigma, 0.5)
    errs = []
    for nx, ny in ((129, 65), (257, 129)):
        g = build_grid(GridConfig(a=p.a, nx=nx, ny=ny))
        u = Field.from_function(g, lambda X, Y: np.maximum(X, 0) ** p.beta)
        chk = energy_scaling_check(u, 0.5, p)
        errs.append(max(abs(chk.dirichlet_factor / chk.predicted[0] - 1), abs(chk.penalty_factor / chk.predicted[1] - 1)))
    assert errs[0] < 0.05 and errs[1] < 0.05
    assert math.isclose(chk.predicted[0], chk.predicted[1], rel_tol=1e-12)
