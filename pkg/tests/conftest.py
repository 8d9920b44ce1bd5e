import numpy as np
import pytest

from replicator import ClaimSpec, ControlLaw, GMatrix, SystemSpec, WeightSpec
from replicator.pde import DiffusionSpec, PayoffSpec

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def scalar_law(claim=None, a=0.0, alpha=0.75):
    sys = SystemSpec(np.zeros((1, 1)), np.eye(1), [a], 1.0)
    w = WeightSpec("pure-power", alpha, 1.0)
    claim = claim or ClaimSpec.linear([[1.0]], 1.0)
    return ControlLaw(sys, w, GMatrix(np.eye(1)), claim)


@pytest.fixture
def law_w():
    return scalar_law()


@pytest.fixture
def law_w2():
    return scalar_law(ClaimSpec.markov(PayoffSpec("square"), DiffusionSpec(), 1.0))


@pytest.fixture
def nilpotent():
    sys = SystemSpec([[0.0, 1.0], [0.0, 0.0]], np.eye(2), [0.0, 0.0], 1.0)
    return sys, WeightSpec("pure-power", 0.75, 1.0), GMatrix(np.eye(2))
