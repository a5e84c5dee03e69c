import numpy as np
import pytest

from mixfdf.catalog import benchmark_plant
from mixfdf.synthesis import SynthesisSpec, synthesize


@pytest.fixture(scope="session")
def plant():
    return benchmark_plant()


@pytest.fixture(scope="session")
def design1(plant):
    return synthesize(SynthesisSpec(plant, 1.0, 0.5))


@pytest.fixture(scope="session")
def design2(plant):
    return synthesize(SynthesisSpec(plant, 0.78, 1.41))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_sym(rng, n):
    M = rng.standard_normal((n, n))
    return 0.5 * (M + M.T)


def random_spd(rng, n, shift=1.0):
    M = rng.standard_normal((n, n))
    return M @ M.T + shift * np.eye(n)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
