import math

import pytest

from supercavity import SystemParams, empty_mode

REFERENCE_OMEGA_A = 1.847760755
_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.stash[_RESULTS] = {}


class _Recorder:
    def __init__(self, store, number, title):
        self.store = store
        self.key = number
        store[number] = [title, "FAIL", "check not reached"]

    def __call__(self, ok, detail):
        self.store[self.key][1:] = ["PASS" if ok else "FAIL", detail]
        print(f"criterion {self.key:2d} {self.store[self.key][1]}: {self.store[self.key][0]} ({detail})")
        return ok


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    return _Recorder(request.config.stash[_RESULTS], number, title)


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, status, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title} ({detail})")


@pytest.fixture
def base():
    return SystemParams(31, eta=0.01, xi=1.0)


@pytest.fixture
def theta4():
    return 4 * math.pi / 32


@pytest.fixture
def nu4(base):
    return empty_mode(4, base)[0]
