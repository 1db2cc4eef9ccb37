import re

_criterion_results = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if m is None:
        return
    k = int(m.group(1))
    if report.when == "call":
        _criterion_results[k] = _criterion_results.get(k, True) and report.passed
    elif report.failed:  # setup/teardown error counts as a failure too
        _criterion_results[k] = False


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criterion_results):
        word = "PASS" if _criterion_results[k] else "FAIL"
        terminalreporter.write_line(f"CRITERION {k}: {word}")
