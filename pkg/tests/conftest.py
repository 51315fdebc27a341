"""Shared pytest plumbing.

The acceptance tests register one summary line per verification criterion;
printing them from a terminal-summary hook keeps them visible in every run,
with or without output capture.
"""

CRITERION_LINES: list[tuple[int, str]] = []


def record_criterion(number: int, line: str) -> None:
    CRITERION_LINES.append((number, line))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, line in sorted(CRITERION_LINES):
        terminalreporter.write_line(line)
