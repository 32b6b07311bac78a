import re

import pytest

from jchsim.hilbert import CompositeSpace
from jchsim.model import JchParams

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_results: dict[int, list[str]] = {}


@pytest.fixture
def params():
    return JchParams.two_ion()


@pytest.fixture
def space():
    return CompositeSpace(2, 2)


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m is None:
        return
    # setup errors and call failures both count against the criterion
    if report.when == "call" or report.outcome != "passed":
        _results.setdefault(int(m.group(1)), []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        outcomes = _results[number]
        ok = all(o == "passed" for o in outcomes)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}")
