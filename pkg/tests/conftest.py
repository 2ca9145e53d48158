"""Print one PASS/FAIL line per acceptance criterion at the end of the run."""

import re

_CRITERIA: dict[int, dict] = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    match = _PATTERN.search(report.nodeid)
    if not match:
        return
    number, name = int(match.group(1)), match.group(2)
    entry = _CRITERIA.setdefault(number, {"name": name, "ok": True, "seen": False})
    if report.when == "call" or report.failed or report.skipped:
        entry["seen"] = True
        if report.failed or report.skipped:
            entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        verdict = "PASS" if entry["ok"] and entry["seen"] else "FAIL"
        terminalreporter.write_line(f"criterion {number} ({entry['name']}): {verdict}")
