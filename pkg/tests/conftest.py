import os

import pytest

VERDICTS = []


def pytest_collection_modifyitems(config, items):
    level = os.environ.get("DEMOLAB_EXTENDED", "")
    for item in items:
        mark = item.get_closest_marker("extended")
        if mark is None:
            continue
        needed = mark.kwargs.get("level", "1")
        if level not in ("1", "full") or (needed == "full" and level != "full"):
            item.add_marker(pytest.mark.skip(reason=f"set DEMOLAB_EXTENDED={needed} to run"))


@pytest.fixture
def verdict():
    def record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in VERDICTS:
            terminalreporter.write_line(line)
