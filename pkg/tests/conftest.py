from __future__ import annotations

from collections import defaultdict

import numpy as np
import pytest

from personagen.store import load_config

_CRITERIA: dict[str, tuple[int, str]] = {}
_RESULTS: dict[int, list[str]] = defaultdict(list)
_TITLES: dict[int, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _CRITERIA[item.nodeid] = (number, title)
            _TITLES[number] = title


def pytest_runtest_logreport(report):
    if report.nodeid not in _CRITERIA:
        return
    number, _ = _CRITERIA[report.nodeid]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _RESULTS[number].append("skipped" if report.skipped else report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _TITLES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_TITLES):
        outcomes = _RESULTS.get(number, [])
        if not outcomes:
            verdict = "NOT RUN"
        elif any(o == "failed" for o in outcomes):
            verdict = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"criterion {number} ({_TITLES[number]}): {verdict}")


@pytest.fixture(scope="session")
def default_config():
    return load_config()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
