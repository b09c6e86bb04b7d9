import pytest

from freqhom import jca

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def device():
    return jca.reference_device()


@pytest.fixture(scope="session")
def jca_grid(device):
    return jca.build_jca(device.config, device.pump)


@pytest.fixture(scope="session")
def schmidt(jca_grid):
    return jca.schmidt_decompose(jca_grid)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
