import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_density(rng, dim=4, rank=None):
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_axis(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


@st.composite
def densities(draw, dim=4):
    seed = draw(st.integers(0, 2**32 - 1))
    rank = draw(st.integers(1, dim))
    return random_density(np.random.default_rng(seed), dim, rank)


@st.composite
def axes(draw):
    return random_axis(np.random.default_rng(draw(st.integers(0, 2**32 - 1))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
