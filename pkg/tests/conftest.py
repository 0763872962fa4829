import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    path = report.nodeid.split("::")[0]
    if not path.endswith("test_acceptance.py"):
        return
    name = report.nodeid.split("::")[-1]
    outcome = "PASS" if report.outcome == "passed" else "FAIL"
    prior = _ACCEPTANCE_RESULTS.get(name)
    if prior != "FAIL":
        _ACCEPTANCE_RESULTS[name] = outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{_ACCEPTANCE_RESULTS[name]} {name}")
