import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance verdicts, filled by tests/test_acceptance.py and echoed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
