from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_results: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test implements")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _results.setdefault(number, {"title": title, "outcomes": []})
    if report.when == "call" or report.outcome != "passed":
        entry["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        outs = entry["outcomes"]
        if "failed" in outs:
            verdict = "FAIL"
        elif outs and all(o == "skipped" for o in outs):
            verdict = "SKIP"
        elif outs:
            verdict = "PASS"
        else:
            verdict = "NOT RUN"
        terminalreporter.write_line(f"criterion {number:>2}: {verdict:<4}  {entry['title']}")
