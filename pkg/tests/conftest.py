"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_c(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    rows = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m or rep.when not in ("call", "setup"):
                continue
            detail = dict(getattr(rep, "user_properties", [])).get("detail", "")
            rows[int(m.group(1))] = ("PASS" if outcome == "passed" else "FAIL", m.group(2), detail)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(rows):
        status, name, detail = rows[n]
        terminalreporter.write_line(f"criterion {n} {status:4} {name}: {detail}")
