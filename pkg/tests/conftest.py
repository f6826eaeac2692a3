import numpy as np
import pytest

from nematic import fields as fl
from nematic import leslie as ls
from nematic import oseen_frank as of


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def frank():
    return of.FrankConstants(1.0, 0.8, 1.2)


@pytest.fixture
def et(frank):
    return frank.tensors()


@pytest.fixture
def parodi():
    """Dissipative coefficients with λ = μ2 + μ3."""
    return ls.LeslieCoefficients(0.5, -0.3, 0.1, 1.0, 0.3, 0.2, -0.2)


@pytest.fixture
def non_parodi():
    """Dissipative coefficients with a nonzero cross term."""
    return ls.LeslieCoefficients(0.5, -0.3, 0.1, 1.0, 0.3, 0.2, 0.1)


@pytest.fixture
def planar():
    return fl.Grid.planar(16)


@pytest.fixture
def cube():
    return fl.Grid((16, 16, 16))


def unit_vectors(rng, n):
    h = rng.normal(size=(n, 3))
    return h / np.linalg.norm(h, axis=-1, keepdims=True)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
