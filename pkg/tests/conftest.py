import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pctof import signal_model as sm
from pctof.acquisition import AcquisitionConfig
from pctof.calibration import build_calibration

settings.register_profile("pctof", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pctof")


def unit_omega_coding(sigma_m, sigma_d=0.0, theta_g=0.0):
    """Pulsed coding with omega = 1 rad/s, convenient for closed-form checks."""
    return sm.CodingConfig(1.0 / (2.0 * math.pi), sm.ModulationSpec.gaussian_pulse(sigma_m),
                           sm.DemodulationSpec.smoothed_rect(sigma_d), 4, theta_g)


@pytest.fixture(scope="session")
def pulsed():
    return sm.pulsed_coding()


@pytest.fixture(scope="session")
def small_table():
    """Noise-free calibration of a 12x8 sensor at 0.5 m."""
    acq = AcquisitionConfig(sm.pulsed_coding())
    return build_calibration(0.5, acq, resolution=(12, 8))


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
