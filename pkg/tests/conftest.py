import pytest
from hypothesis import HealthCheck, settings

from snspd_optics.stack import preset

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def presets():
    return {name: preset(name) for name in ("mirror13", "single-planar", "single-device", "bilayer-device")}
