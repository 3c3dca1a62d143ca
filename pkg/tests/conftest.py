import numpy as np
import pytest

from spinbath import HilbertLayout, StateVector, sample_couplings
from spinbath.typicality import gaussian_unit_vector

# registry filled by test_acceptance.py; printed after the run
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture
def small_table():
    """3+5 spins with the production coupling scales."""
    return sample_couplings(3, 5, -0.5, 0.2, 0.5, 42)


@pytest.fixture
def ring4_table():
    """The deterministic 4-spin ring alone (no environment couplings)."""
    return sample_couplings(4, 0, -0.5, 0.0, 0.0, 0)


def random_state(layout: HilbertLayout, seed: int) -> StateVector:
    return StateVector(gaussian_unit_vector(layout.dim,
                                            np.random.default_rng(seed)),
                       layout)
