import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))

# criterion number -> (passed, description, detail)
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture
def criterion():
    """Record an acceptance verdict so the summary prints one line per criterion."""

    def record(number: int, description: str, passed: bool, detail: str = ""):
        ACCEPTANCE_RESULTS[number] = (bool(passed), description, detail)
        print(f"[criterion {number}] {'PASS' if passed else 'FAIL'}: {description} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, description, detail = ACCEPTANCE_RESULTS[number]
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {description}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
