import numpy as np
import pytest

from . import acceptance_log


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance_log.lines):
        terminalreporter.write_line(acceptance_log.lines[number])
