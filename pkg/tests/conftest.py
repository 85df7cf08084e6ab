import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from footforce.core import humanoid_skeleton
from footforce.synth import GaitConfig, generate_gait

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def skeleton():
    return humanoid_skeleton()


@pytest.fixture(scope="session")
def gait_take():
    """Twenty seconds of clean synthetic walking at 100 Hz."""
    return generate_gait(GaitConfig(duration_s=20.0, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion that ran in this session."""
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
