import numpy as np
import pytest

from pghd.fields import Grid, LateralMode, PhysParams

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def params():
    return PhysParams()


@pytest.fixture
def small_grid():
    return Grid(9, 7, 5)


@pytest.fixture
def periodic_grid():
    return Grid(8, 8, 6, lateral_mode=LateralMode.PERIODIC_TEST)


@pytest.fixture
def periodic_params():
    return PhysParams(alpha=0.0, beta=0.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
