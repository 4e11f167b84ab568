"""Collects acceptance-criterion outcomes and prints one PASS/FAIL line each."""

import pytest

_OUTCOMES: dict[str, bool] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if report.when == "call" or report.failed:
        _OUTCOMES[name] = _OUTCOMES.get(name, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _OUTCOMES.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
