import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from qcurv import build_context, sphere_hyperbolic, flat_torus4, sphere_sphere, sphere_torus  # noqa: E402

settings.register_profile(
    "qcurv",
    deadline=None,
    max_examples=15,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow],
)
settings.load_profile("qcurv")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def ctx_s2s2():
    return build_context(sphere_sphere(), "full")


@pytest.fixture(scope="session")
def ctx_s2t2():
    return build_context(sphere_torus(), "full")


@pytest.fixture(scope="session")
def ctx_t4():
    return build_context(flat_torus4(), "full")


@pytest.fixture(scope="session")
def ctx_s2h2():
    return build_context(sphere_hyperbolic(), "factor1")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
