import pytest

from rmflab.model import ModelSpec
from rmflab.sieve import build_tables


@pytest.fixture(scope="session")
def tables():
    return build_tables(10**5)


@pytest.fixture(scope="session")
def big_tables():
    return build_tables(10**6)


@pytest.fixture(scope="session")
def rad():
    return ModelSpec.rademacher()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[1].rstrip(":").rstrip("abc")), s)):
            terminalreporter.write_line(line)
