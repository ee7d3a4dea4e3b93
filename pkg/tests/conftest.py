import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): one named acceptance criterion"
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(report, "user_properties", []) or [])
            name = props.get("acceptance")
            if name:
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append((name, status))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"[{status}] {name}")


@pytest.fixture(autouse=True)
def _record_acceptance_name(request, record_property):
    marker = request.node.get_closest_marker("acceptance")
    if marker:
        record_property("acceptance", marker.kwargs.get("name", request.node.name))
