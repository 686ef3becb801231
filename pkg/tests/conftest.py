import numpy as np
import pytest

from pmhomog.medium import MediumSpec

# acceptance lines collected by tests/test_acceptance.py, echoed at session end
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_constant():
    """Constant medium (a, b, gamma) = (1, 0, 1)."""
    return MediumSpec(kind="constant", a_range=(1.0, 1.0), b_range=(0.0, 0.0), gamma_range=(1.0, 1.0))


@pytest.fixture
def two_atom():
    """a in {1, 4} with equal weights, b = 0, gamma = 1."""
    return MediumSpec(kind="atoms", atoms=((1.0, 0.0, 1.0), (4.0, 0.0, 1.0)), weights=(0.5, 0.5))


@pytest.fixture
def periodic_medium():
    return MediumSpec(kind="periodic", a_range=(1.0, 3.0))


@pytest.fixture
def rich_media():
    """Heterogeneous media varying all three coefficients."""
    kw = dict(a_range=(0.5, 2.0), b_range=(-0.3, 0.3), gamma_range=(0.5, 1.5), modes=3)
    return {
        "periodic": MediumSpec(kind="periodic", **kw),
        "almost_periodic": MediumSpec(kind="almost_periodic", **kw),
        "random_fourier": MediumSpec(kind="random_fourier", **kw),
    }
