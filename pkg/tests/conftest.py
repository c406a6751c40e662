import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from anisotv.analytic import disc_datum  # noqa: E402
from anisotv.anisotropy import AnisotropyModel  # noqa: E402
from anisotv.grid import GridSpec  # noqa: E402
from anisotv.solver import ProblemSpec, solve  # noqa: E402
from cases import rof_disc  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def disc256():
    """The Euclidean ROF disc on a 256^2 grid, solved once per session."""
    spec, result, _ = rof_disc(256, 1e-5)
    return spec, result


@pytest.fixture(scope="session")
def disc64():
    grid = GridSpec.regular(64)
    model = AnisotropyModel.euclidean(2)
    spec = ProblemSpec.rof(disc_datum(grid, 0.25), 32.0, model)
    return spec, solve(spec, gap_tol=1e-6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
