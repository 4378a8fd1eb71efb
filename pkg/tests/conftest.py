from collections import defaultdict

import pytest


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", tuple(mark.args)))


def pytest_terminal_summary(terminalreporter):
    outcome = defaultdict(lambda: True)
    labels = {}
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if not isinstance(rep, pytest.TestReport):
                continue
            for key, (number, label) in getattr(rep, "user_properties", ()):
                if key != "criterion":
                    continue
                labels[number] = label
                outcome[number] = outcome[number] and not rep.failed
    if not labels:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(labels):
        verdict = "PASS" if outcome[number] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {labels[number]}")
