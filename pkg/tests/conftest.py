"""Shared test plumbing.

The acceptance tests register one verdict line each; the terminal summary
hook replays them after the run so the per-criterion outcomes are visible
even though pytest captures stdout.
"""

_ACCEPTANCE_LINES = []


def record_acceptance(line):
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
