import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


_CRITERIA: dict[str, tuple[str, float]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_A" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1][len("test_"):]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _CRITERIA[name] = ("PASS" if report.passed else "SKIP" if report.skipped else "FAIL", report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split("_")[0][1:])):
        status, dur = _CRITERIA[name]
        terminalreporter.write_line(f"{name.split('_')[0]:<3} {status:<4} {dur:7.2f}s  {name}")
