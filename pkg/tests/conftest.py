"""Shared test plumbing.

The acceptance module records one verdict line per criterion here; the
terminal-summary hook prints them after the run so the verdicts are
visible regardless of pytest's output capturing.
"""

CRITERION_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERION_LINES):
            terminalreporter.write_line(line)
