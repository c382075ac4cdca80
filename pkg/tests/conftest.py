import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sociallearn.config import PAPER_NU  # noqa: E402
from sociallearn.models import GaussianModel  # noqa: E402
from sociallearn.network import lazy_metropolis, paper_graph  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def paper_A():
    return lazy_metropolis(paper_graph())


@pytest.fixture(scope="session")
def paper_model():
    return GaussianModel.shifted(PAPER_NU)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
