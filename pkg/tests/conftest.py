"""Collects acceptance-criterion outcomes and prints one line per criterion."""

from collections import OrderedDict

import pytest

_CRITERIA = OrderedDict()


@pytest.fixture
def note(request):
    """Attach a measured value to the current test's criterion line."""

    def add(text):
        request.node.user_properties.append(("note", text))

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "parts": []})
    notes = [v for k, v in item.user_properties if k == "note"]
    entry["parts"].append((item.name, report.passed, notes))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number, entry in sorted(_CRITERIA.items(), key=lambda kv: int(kv[0])):
        ok = all(passed for _, passed, _ in entry["parts"])
        failed = [name for name, passed, _ in entry["parts"] if not passed]
        notes = "; ".join(n for _, _, ns in entry["parts"] for n in ns)
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {entry['title']}"
        if notes:
            line += f"  [{notes}]"
        if failed:
            line += f"  failing: {', '.join(failed)}"
        tr.write_line(line)
