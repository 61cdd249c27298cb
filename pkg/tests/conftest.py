import json
import os
import re

import pytest

HERE = os.path.dirname(os.path.abspath(__file__))

_TITLES = {}
_OUTCOMES = {}
_DETAILS = {}


@pytest.fixture(scope="session")
def oracle():
    """Frozen reference values produced by tests/oracles.py."""
    with open(os.path.join(HERE, "data", "oracle_values.json")) as fh:
        return json.load(fh)


@pytest.fixture
def report_detail(request):
    """Attach a one-line measurement to the acceptance summary."""
    def record(text):
        _DETAILS[request.node.nodeid] = text
    return record


def _criterion(nodeid):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", nodeid)
    return int(m.group(1)) if m else None


def pytest_collection_modifyitems(items):
    for item in items:
        n = _criterion(item.nodeid)
        if n is not None:
            doc = (item.function.__doc__ or "").strip().splitlines()
            _TITLES[item.nodeid] = (n, doc[0] if doc else item.name)


def pytest_runtest_logreport(report):
    if report.nodeid not in _TITLES:
        return
    if report.when == "call" or report.outcome != "passed":
        _OUTCOMES.setdefault(report.nodeid, report.outcome)
        if report.when == "call":
            _OUTCOMES[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for nodeid, (n, title) in sorted(_TITLES.items(), key=lambda kv: kv[1][0]):
        if nodeid not in _OUTCOMES:
            continue
        verdict = "PASS" if _OUTCOMES[nodeid] == "passed" else "FAIL"
        line = f"criterion {n:2d} {verdict}  {title}"
        if nodeid in _DETAILS:
            line += f"  [{_DETAILS[nodeid]}]"
        tr.write_line(line)
