import numpy as np
import pytest

from weightmax.network import NetworkParams, forward_sample, init_params


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_params():
    return init_params((3, 4, 3, 2), ("uniform_range", 1.0), seed=7)


@pytest.fixture
def small_trace(small_params, rng):
    inputs = rng.random((32, 3)) < 0.5
    return forward_sample(small_params, inputs.astype(float), rng)


def chain_params(b0=0.3, v=1.5, c=-0.4) -> NetworkParams:
    """One input-free hidden unit feeding one output unit."""
    return NetworkParams([np.zeros((1, 0)), np.array([[v]])], [np.array([b0]), np.array([c])])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
