import os

import pytest
from hypothesis import HealthCheck, settings

# numba compiles on first use; deadlines would flag that one-off cost
settings.register_profile(
    "masersim", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "masersim"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def out_env(tmp_path, monkeypatch):
    monkeypatch.setenv("MASERSIM_OUT", str(tmp_path / "env-out"))
    return tmp_path
