import pytest
from hypothesis import HealthCheck, settings

from mtuc.scenario import generate_random

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def small_scenario():
    return generate_random(4, 2, devices_per_dg=3, seed=3)


@pytest.fixture(scope="session")
def single_auv_scenario():
    return generate_random(4, 1, devices_per_dg=2, seed=0)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key, (ok, detail) in sorted(results.items(), key=lambda kv: (int(kv[0].rstrip("abcd")), kv[0])):
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} - {detail}")
