"""Shared fixtures and the acceptance-summary terminal hook."""

import pytest

from slumpgp.dataset import SplitSpec, builtin_table1, split

# Filled by test_acceptance.py; replayed after the run so the one-line
# verdicts survive output capture.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def table1():
    return builtin_table1()


@pytest.fixture(scope="session")
def table1_split():
    """The conventional 28/6 split of the built-in table."""
    return split(builtin_table1(), SplitSpec(28))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
