import numpy as np
import pytest

from rgaudit.nets import random_stack
from rgaudit.rbm import RbmLayer

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_stack():
    """Input 3 -> 3 -> 2, moderate random weights."""
    return random_stack([3, 3, 2], np.random.default_rng(7))


@pytest.fixture
def x3():
    return np.array([0.3, 0.55, 0.8])


def random_layer(rng, n_out, n_in, scale=1.0):
    return RbmLayer(scale * rng.standard_normal((n_out, n_in)), scale * rng.standard_normal(n_out),
                    scale * rng.standard_normal(n_in))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
