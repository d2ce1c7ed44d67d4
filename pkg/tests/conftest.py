import numpy as np
import pytest

from asyncfbs import make_quadratic

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """``acceptance(name, passed, detail)`` records one criterion line for the terminal summary."""

    def record(name, passed, detail=""):
        line = f"{name}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        request.config.stash[_ACCEPTANCE].append(line)
        tr = request.config.pluginmanager.get_plugin("terminalreporter")
        if tr is not None:
            tr.write_line("\n" + line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def quad():
    return make_quadratic(3, 2, mu=0.5, L=1.0, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
