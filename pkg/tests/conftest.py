import numpy as np
import pytest

from rkm.problems import make_problem


@pytest.fixture(scope="session")
def phillips200():
    return make_problem("phillips", 200)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one acceptance line: ``acceptance(number, ok, detail)``."""
    lines = request.config.stash[_ACCEPTANCE]

    def report(number, ok, detail):
        line = f"criterion {str(number):>3}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
