import re

_results = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        reason = ""
        if report.failed and hasattr(report.longrepr, "reprcrash"):
            reason = report.longrepr.reprcrash.message.splitlines()[0]
        _results[report.nodeid] = (report.outcome, reason)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (outcome, reason) in sorted(_results.items(), key=lambda kv: _criterion(kv[0])):
        tag = "PASS" if outcome == "passed" else "FAIL"
        name = nodeid.split("::")[-1]
        line = f"{tag} criterion {_criterion(nodeid):>2}: {name}"
        if reason:
            line += f" ({reason})"
        terminalreporter.write_line(line)


def _criterion(nodeid):
    m = re.search(r"test_c(\d+)_", nodeid)
    return int(m.group(1)) if m else 0
