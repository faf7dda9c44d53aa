import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optstirap import pulses
from optstirap.errors import DetuningTooSmall, NotNormalized
from optstirap.hamiltonian import SystemParams
from optstirap.propagator import IntegratorConfig
from optstirap.reduction import (ELIMINATED, RESONANT, consistency_check, eliminate,
                                 map_amplitudes, resonant_reduce)
from optstirap import csvio

TIGHT = IntegratorConfig(1e-12, 1e-14)


def test_map_initial_and_final():
    np.testing.assert_allclose(map_amplitudes([1, 0], 0.0), [1, 0, 0], atol=1e-15)
    c = map_amplitudes([1, 0], math.pi / 2)
    np.testing.assert_allclose(c, [0, 0, -1], atol=1e-15)


def test_map_coherence_example():
    b = [(1 + 1j) / 2, (1 - 1j) / 2]
    c = map_amplitudes(b, math.pi / 4)
    # b1* b2 = -i/2, so c2 = 2i Im(b1* b2) = -i and c1 = c3 = 0
    assert c[1] == pytest.approx(-1j, abs=1e-15)
    assert abs(c[0]) < 1e-15 and abs(c[2]) < 1e-15


def test_map_rejects_unnormalized():
    with pytest.raises(NotNormalized):
        map_amplitudes([1, 0.1], 0.3)


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi),
       st.floats(-3, 3))
def test_property_map_is_unit_norm_and_final_population(a, phi1, phi2, theta):
    b = np.array([math.cos(a) * np.exp(1j * phi1), math.sin(a) * np.exp(1j * phi2)])
    c = map_amplitudes(b, theta)
    assert abs(np.sum(np.abs(c) ** 2) - 1) <= 1e-12
    # at theta = pi/2 the third population is (|b1|^2 - |b2|^2)^2
    c3 = map_amplitudes(b, math.pi / 2)[2]
    assert abs(abs(c3) ** 2 - (abs(b[0]) ** 2 - abs(b[1]) ** 2) ** 2) <= 1e-12


def test_resonant_effective_system(flagship):
    eff = resonant_reduce(flagship)
    t = np.linspace(-4, 4, 101)
    p, s = pulses.evaluate(flagship, t)
    np.testing.assert_array_equal(eff.omega_eff(t), p)
    np.testing.assert_array_equal(eff.delta_eff(t), s)
    np.testing.assert_allclose(eff.splitting(t), flagship.omega0 * flagship.mask.value(t),
                               rtol=1e-13)
    flat = resonant_reduce(pulses.DdpOptimized(5.0, pulses.ConstantMask(), pulses.Sigmoid(4.0)))
    assert np.max(np.abs(flat.splitting(t) - 5.0)) <= 1e-12 * 5


def test_eliminated_effective_values(gaussian):
    eff = eliminate(gaussian, 300.0)
    assert eff.regime == ELIMINATED
    # at t = 0 the pulses are equal, so the effective detuning vanishes
    assert abs(eff.delta_eff(0.0)) <= 1e-15
    p, s = gaussian._envelopes(0.3)
    assert eff.omega_eff(0.3) == pytest.approx(-p * s / 600)


def test_eliminate_thresholds(gaussian):
    with pytest.raises(DetuningTooSmall):
        eliminate(gaussian, 50.0)
    with pytest.warns(UserWarning):
        eliminate(gaussian, 100.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        eliminate(gaussian, 250.0)


def test_effective_derivatives_match_finite_difference(gaussian):
    for eff in (resonant_reduce(gaussian), eliminate(gaussian, 400.0)):
        t, h = np.linspace(-2, 2, 21), 1e-5
        dom, dde = eff.derivatives(t)
        np.testing.assert_allclose(dom, (eff.omega_eff(t + h) - eff.omega_eff(t - h)) / (2 * h),
                                   atol=1e-6 * 20)
        np.testing.assert_allclose(dde, (eff.delta_eff(t + h) - eff.delta_eff(t - h)) / (2 * h),
                                   atol=1e-6 * 20)


@pytest.mark.parametrize("desc", [
    pulses.DdpOptimized(20.0, pulses.Hypergaussian(3, 2.0), pulses.Sigmoid(4.0)),
    pulses.Gaussian(10.0, 1.2),
], ids=["ddp", "gaussian"])
def test_resonant_consistency(desc):
    rep = consistency_check(desc, SystemParams(), TIGHT)
    assert rep.regime == RESONANT
    assert rep.max_deviation <= 1e-8


def test_eliminated_cross_validation():
    g = pulses.Gaussian(10.0, 1.2)
    with pytest.warns(UserWarning):
        rep = consistency_check(g, SystemParams(delta=50.0), TIGHT)
    assert rep.final_deviation <= 2e-2


def test_eliminated_deviation_shrinks_with_detuning():
    g = pulses.Gaussian(10.0, 1.2)
    devs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in (3, 10, 30, 100):
            devs.append(consistency_check(g, SystemParams(delta=k * 10.0), TIGHT).max_deviation)
    assert all(b < a for a, b in zip(devs, devs[1:]))


def test_consistency_csv(tmp_path, gaussian):
    rep = consistency_check(gaussian, SystemParams(), IntegratorConfig(), samples=21)
    comments, header, rows = csvio.read_csv(rep.write_csv(tmp_path / "c.csv"))
    assert header[-1] == "deviation" and len(rows) == 21
    assert comments == ["regime: resonant"]
