"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (report.when == "call" or report.failed or report.skipped):
        return
    status = "FAIL" if report.failed else "SKIP" if report.skipped else "PASS"
    title = (item.obj.__doc__ or item.name).strip().splitlines()[0]
    detail = dict(report.user_properties).get("detail")
    if detail:
        title = f"{title} [{detail}]"
    _CRITERIA[marker.args[0]] = (status, report.duration, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, seconds, title = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title} ({seconds:.1f} s)")
