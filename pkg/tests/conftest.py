"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            number, title = mark.args
            _results.setdefault(number, {"title": title, "outcomes": []})


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number = mark.args[0]
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        _results[number]["outcomes"].append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        if not entry["outcomes"]:
            status = "NOT RUN"
        else:
            status = "PASS" if all(entry["outcomes"]) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']}")
