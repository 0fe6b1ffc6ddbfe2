import os

import pytest
from hypothesis import HealthCheck, settings

from vibromollow.model import DriveConfig, EmitterParams, PhononMode, VibronicSystem

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

GAMMA_REF = 4.1  # µeV
NU_REF, KAPPA_REF = 5.0, 0.2  # meV


@pytest.fixture
def atom():
    em = EmitterParams.from_microev(GAMMA_REF)
    return VibronicSystem(em, (), DriveConfig(10 * em.gamma))


@pytest.fixture
def one_mode():
    """Single 5 meV mode with eta = nu / 3, driven at ten times gamma."""
    em = EmitterParams.from_microev(GAMMA_REF)
    return VibronicSystem(em, (PhononMode(NU_REF, NU_REF / 3, KAPPA_REF),), DriveConfig(10 * em.gamma))


# acceptance verdicts, echoed in the terminal summary so they survive output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
