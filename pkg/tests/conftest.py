import numpy as np
import pytest

from anyonsim.theories import build_ising, build_tambara_yamagami, solve_hexagon

# filled by tests/test_acceptance.py, printed once at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, title = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture(scope="session")
def ising_classes():
    return {kappa: solve_hexagon(build_ising(kappa), seed=0, restarts=200) for kappa in (1, -1)}


@pytest.fixture(scope="session")
def ising(ising_classes):
    """Ising with kappa = +1 and spin exp(i pi/8)."""
    return ising_classes[1][0].theory(build_ising(1))


@pytest.fixture(scope="session")
def ty2_braided():
    data = build_tambara_yamagami(2)
    classes = solve_hexagon(data, seed=0, restarts=200)
    return classes[0].theory(data)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)
