import functools
import sys

import pytest

from hhsmax.maximization import maximize
from hhsmax.models import model_from_name


@functools.lru_cache(maxsize=None)
def model(name, radius, **kw):
    return model_from_name(name, radius, **kw)


@functools.lru_cache(maxsize=None)
def maximized(name, radius):
    return maximize(model(name, radius).structure)


@pytest.fixture(scope="session")
def grid6():
    return model("grid-Z2", 6)


@pytest.fixture(scope="session")
def grid8():
    return model("grid-Z2", 8)


@pytest.fixture(scope="session")
def free6():
    return model("free-F2", 6)


@pytest.fixture(scope="session")
def mr_grid6():
    return maximized("grid-Z2", 6)


@pytest.fixture(scope="session")
def mr_grid8():
    return maximized("grid-Z2", 8)


@pytest.fixture(scope="session")
def mr_elec6():
    return maximized("electrified-F2", 6)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n][1])
