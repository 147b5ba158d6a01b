import warnings

import pytest

from fracfb.analysis import centre_free_boundary
from fracfb.grid import GridConfig, build_grid
from fracfb.params import EnergyParams

_CACHE = {}


def centred_minimizer(sigma=0.5, gamma=0.5, nx=129, ny=65):
    """Minimizer with ramp data whose free boundary sits at the origin (cached per session)."""
    key = (sigma, gamma, nx, ny)
    if key not in _CACHE:
        p = EnergyParams(sigma, gamma)
        g = build_grid(GridConfig(a=p.a, nx=nx, ny=ny))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _CACHE[key] = (p,) + tuple(centre_free_boundary(g, p))
    return _CACHE[key]


@pytest.fixture(scope="session")
def centred():
    return centred_minimizer


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
