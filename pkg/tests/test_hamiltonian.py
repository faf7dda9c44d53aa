import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optstirap import pulses
from optstirap.errors import ConfigError, NonHermitianInput
from optstirap.hamiltonian import (SystemParams, build_three_state, build_two_state, dark_state,
                                   eigensystem, three_state_matrix)

from conftest import all_three_state


def test_zero_pulses_give_zero_matrix():
    assert not np.any(three_state_matrix(0.0, 0.0))
    assert not np.any(build_two_state(0.0, 0.0).entries)


def test_three_state_entries():
    h = three_state_matrix(1.0, 2.0, delta=3.0)
    assert h[0, 1] == 0.5 and h[1, 2] == 1.0 and h[1, 1] == 3.0
    np.testing.assert_array_equal(h, h.T)


def test_loss_enters_middle_diagonal_only():
    h = three_state_matrix(1.0, 2.0, 0.3, 0.1, gamma=0.5)
    assert h[1, 1].imag == -0.25
    mask = np.ones((3, 3), bool)
    mask[1, 1] = False
    assert not np.any(h[mask].imag)


def test_build_three_state_uses_descriptor(flagship):
    h = build_three_state(flagship, SystemParams(delta=1.5), 0.0).entries
    p, s = pulses.evaluate(flagship, 0.0)
    assert h[0, 1] == pytest.approx(0.5 * p) and h[1, 2] == pytest.approx(0.5 * s)
    assert h[1, 1] == 1.5


def test_two_state_splitting_and_eigenvalues():
    w, v = eigensystem(build_two_state(3.0, 4.0))
    np.testing.assert_allclose(w, [-0.5, 4.5], atol=1e-15)
    assert w[1] - w[0] == pytest.approx(5.0)
    np.testing.assert_allclose(v.conj().T @ v, np.eye(2), atol=1e-15)


def test_landau_zener_at_crossing():
    lz = pulses.LandauZener(1.0, 1.0)
    om, de = lz._envelopes(0.0)
    assert om == 1.0 and de == 0.0


def test_three_state_resonant_eigenvalues(flagship):
    h = build_three_state(flagship, SystemParams(), 0.4)
    p, s = pulses.evaluate(flagship, 0.4)
    r = math.hypot(p, s)
    np.testing.assert_allclose(eigensystem(h)[0], [-r / 2, 0, r / 2], atol=1e-13 * r)


def test_zero_matrix_eigensystem():
    w, _ = eigensystem(np.zeros((3, 3)))
    assert not np.any(w)


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitianInput):
        eigensystem(three_state_matrix(1.0, 1.0, gamma=0.2))


def test_dark_state_limits(flagship):
    np.testing.assert_allclose(dark_state(flagship, -30.0).amplitudes, [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(dark_state(flagship, 30.0).amplitudes, [0, 0, -1], atol=1e-12)
    h = math.sqrt(2) / 2
    np.testing.assert_allclose(dark_state(flagship, 0.0).amplitudes, [h, 0, -h], atol=1e-15)


@pytest.mark.parametrize("desc", all_three_state(), ids=lambda d: type(d).__name__)
def test_dark_state_residual(desc, rng):
    for t in rng.uniform(-6, 6, 200):
        h = build_three_state(desc, SystemParams(delta=rng.uniform(-5, 5)), t).entries
        d = dark_state(desc, t).amplitudes
        assert np.linalg.norm(h @ d) <= 1e-13 * max(1.0, desc.omega0)


def test_system_params_validation():
    with pytest.raises(ConfigError):
        SystemParams(gamma=-1)
    with pytest.raises(ConfigError):
        SystemParams(window=(1, -1))


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-20, 20), st.floats(-20, 20))
def test_property_dark_state_in_kernel(p, s, delta, delta2):
    h = three_state_matrix(p, s, delta, 0.0)
    theta = math.atan2(p, s) if (p or s) else 0.0
    d = np.array([math.cos(theta), 0.0, -math.sin(theta)])
    assert np.linalg.norm(h @ d) <= 1e-13 * max(1.0, abs(p), abs(s))


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_property_two_state_splitting(om, de):
    w, _ = eigensystem(build_two_state(om, de))
    assert w[1] - w[0] == pytest.approx(math.hypot(om, de), abs=1e-12 * (1 + abs(om) + abs(de)))
