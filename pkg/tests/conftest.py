import pytest

_CRITERIA: dict[str, list[tuple[str, float, str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    label = marker.args[0]
    detail = dict(item.user_properties).get("detail", "")
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.outcome == "passed" else "FAIL"
        _CRITERIA.setdefault(label, []).append((status, report.duration, detail))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: int(s.split()[0])):
        runs = _CRITERIA[label]
        status = "PASS" if all(r[0] == "PASS" for r in runs) else "FAIL"
        seconds = sum(r[1] for r in runs)
        detail = "; ".join(r[2] for r in runs if r[2])
        line = f"{status} criterion {label} ({seconds:.1f} s)"
        terminalreporter.write_line(line + (f": {detail}" if detail else ""))
