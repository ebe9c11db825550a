import numpy as np
import pytest

from gridnav.env import default_paper_layout, empty_layout


@pytest.fixture(scope="session")
def paper_env():
    return default_paper_layout()


@pytest.fixture(scope="session")
def open_env():
    return empty_layout(100)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
