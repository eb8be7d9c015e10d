"""Collects one pass/fail line per acceptance criterion and prints them at the
end of the session."""

_results = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        _results[report.nodeid.split("::")[-1]] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_results):
        outcome, detail = _results[name]
        label = "PASS" if outcome == "passed" else "FAIL"
        num = name.split("_")[2]
        terminalreporter.write_line(f"criterion {int(num):>2}: {label}  {detail}")
