"""Collects acceptance outcomes and prints one line per criterion after the run."""
import pytest

_DETAILS: dict[str, str] = {}


@pytest.fixture
def criterion(request):
    """Record a one-line detail for the current acceptance test."""
    def note(text: str) -> None:
        _DETAILS[request.node.nodeid] = text
    return note


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" not in rep.nodeid or (rep.when != "call" and outcome == "passed"):
                continue
            rows.append((rep.nodeid, "PASS" if outcome == "passed" else "FAIL"))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, status in sorted(rows):
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{status}  {name}  {_DETAILS.get(nodeid, '')}".rstrip())
