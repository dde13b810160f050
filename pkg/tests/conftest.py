import time
from collections import OrderedDict

import pytest

SUITE_BUDGET_S = 30 * 60

_results: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _results.setdefault(number, {"title": title, "ok": True, "seconds": 0.0, "ran": False})
    entry["seconds"] += report.duration
    if report.when == "call":
        entry["ran"] = True
    if report.failed or (report.when == "call" and report.skipped):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    total = sum(e["seconds"] for e in _results.values())
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        e = _results[number]
        ok = e["ok"] and e["ran"]
        if number == 11:
            ok = ok and total < SUITE_BUDGET_S
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {e['title']} ({e['seconds']:.1f} s)")
    terminalreporter.write_line(f"acceptance suite time {total:.1f} s (budget {SUITE_BUDGET_S} s)")


@pytest.fixture
def stopwatch():
    start = time.perf_counter()
    return lambda: time.perf_counter() - start
