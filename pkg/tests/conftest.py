"""Collects numbered acceptance outcomes and prints one line per criterion."""
from __future__ import annotations

import pytest

_outcomes: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    entry = _outcomes.setdefault(number, {"title": title, "ok": True, "notes": []})
    if report.failed:
        entry["ok"] = False
        if call.excinfo is not None:
            entry["notes"].append(call.excinfo.exconly().splitlines()[0][:160])
    if report.when == "call":
        entry["notes"].extend(str(v) for k, v in item.user_properties if k == "measured")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        e = _outcomes[number]
        status = "PASS" if e["ok"] else "FAIL"
        notes = "; ".join(e["notes"])
        line = f"criterion {number:>2} {status}: {e['title']}"
        terminalreporter.write_line(line + (f" [{notes}]" if notes else ""))
