import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from offload_auction.topology import Topology  # noqa: E402

AP, HH = "access_point", "handheld"


def line_topology(*kinds):
    """Path graph with node ids 0..n-1 and the given roles in order."""
    roles = {i: k for i, k in enumerate(kinds)}
    edges = [(i, i + 1) for i in range(len(kinds) - 1)]
    return Topology(roles, edges)


@pytest.fixture
def line5():
    # AP1(0) - a(1) - b(2) - c(3) - AP2(4)
    return line_topology(AP, HH, HH, HH, AP)


@pytest.fixture
def line4():
    # AP1(0) - g(1) - t(2) - AP2(3)
    return line_topology(AP, HH, HH, AP)


@pytest.fixture
def line3():
    return line_topology(AP, HH, AP)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")
    config.stash[_ACCEPTANCE] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else "FAIL"
        item.config.stash[_ACCEPTANCE].append((number, f"{status}  criterion {number}: {title}"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
