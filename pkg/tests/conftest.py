import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import load_frozen  # noqa: E402
from rswave.spectral import SpectralModel  # noqa: E402
from rswave.wave import InitialProfile  # noqa: E402


@pytest.fixture(scope="session")
def frozen():
    return load_frozen()


@pytest.fixture(scope="session")
def model():
    return SpectralModel()


@pytest.fixture(scope="session")
def profile():
    return InitialProfile()


def pytest_terminal_summary(terminalreporter):
    import _report

    if _report.LINES:
        terminalreporter.section("acceptance criteria")
        for line in _report.LINES:
            terminalreporter.write_line(line)
