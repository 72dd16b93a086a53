import pytest
from hypothesis import settings

from twistlab.forms import delta_form

settings.register_profile("twistlab", deadline=None, max_examples=60)
settings.load_profile("twistlab")


@pytest.fixture(scope="session")
def delta():
    return delta_form()


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome; printed again in the terminal summary."""

    def record(number: int, name: str, passed: bool, detail: str):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {name} ({detail})"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
