import sys
import numpy as np
import pytest

from fraclap.continuation import BetaLadder, continue_beta
from fraclap.core import ProblemParams
from fraclap.solver import BoundaryData, build_grid


def _sweep(q, nx=129, ny=65):
    prm = ProblemParams(s=0.5, k=2, p=1.0, q=q)
    grid = build_grid(-1.0, 1.0, 1.0, nx, ny, prm.a)
    bd = BoundaryData.mirror_crossing(grid)
    return continue_beta(prm, grid, bd, BetaLadder(1.0, 10.0, 7))


@pytest.fixture(scope="session")
def lv_sweep():
    """Final field and record of the LV ladder 1 -> 1e6 on the mirror crossing."""
    return _sweep(1.0)


@pytest.fixture(scope="session")
def gp_sweep():
    return _sweep(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
