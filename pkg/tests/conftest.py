import math

import numpy as np
import pytest
from hypothesis import settings

from optstirap import pulses

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


@pytest.fixture
def flagship():
    """Optimized pair with hypergaussian mask n=3, T0=2, sigmoid lambda=4, Omega0=20."""
    return pulses.DdpOptimized(20.0, pulses.Hypergaussian(3, 2.0), pulses.Sigmoid(4.0, 1.0))


@pytest.fixture
def gaussian():
    return pulses.Gaussian(20.0, 1.2, 1.0)


def all_three_state(omega0=20.0):
    return [
        pulses.DdpOptimized(omega0, pulses.Hypergaussian(3, 2.0), pulses.Sigmoid(4.0)),
        pulses.DdpOptimized(omega0, pulses.Hypergaussian(1, 2.0), pulses.Sigmoid(2.0)),
        pulses.FractionalDdp(omega0, pulses.Hypergaussian(1, 2.0), pulses.Sigmoid(2.0),
                             alpha=math.pi / 4),
        pulses.Gaussian(omega0, 1.2),
        pulses.FractionalGaussian(omega0, 1.4, alpha=math.pi / 4),
    ]


def central_difference(fn, t, h=1e-5):
    return (fn(t + h) - fn(t - h)) / (2 * h)


@pytest.fixture(name="rng")
def _rng():
    return np.random.default_rng(20240611)


# acceptance criteria report lines, filled by test_acceptance
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
