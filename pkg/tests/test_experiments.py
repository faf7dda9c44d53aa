import math

import numpy as np
import pytest

from optstirap import csvio, experiments, pulses
from optstirap.errors import ConfigError, NoBreakdownDetected
from optstirap.experiments import (PEAK_RABI, SINGLE_PHOTON, SUPERPOSITION, MASK_WIDTH,
                                   SweepSpec, rwa_error_estimate, run_sweep)
from optstirap.hamiltonian import SystemParams
from optstirap.propagator import AmplitudeState, IntegratorConfig, PropagationResult, propagate


def fake_result(c):
    c = np.asarray(c, dtype=complex)
    return PropagationResult(AmplitudeState(10.0, c), np.array([10.0]), c[None, :], 0.0, 0, 0, 0.0)


def test_rwa_worked_magnitudes():
    assert rwa_error_estimate(1e16, 1e9, 1e-6) == 1e-8
    assert rwa_error_estimate(1e16, 1e8, 1e-8) == 1e-16
    assert rwa_error_estimate(1e16, 0.0, 1e-8) == 0.0
    with pytest.raises(ConfigError):
        rwa_error_estimate(0.0, 1.0, 1.0)


def test_infidelity_limits():
    assert experiments.transfer_infidelity(fake_result([1, 0, 0])) == 1
    assert experiments.transfer_infidelity(fake_result([0, 0, -1])) == 0
    a = 0.7
    target = [math.cos(a), 0, -math.sin(a)]
    assert experiments.superposition_infidelity(fake_result(target), a) == pytest.approx(0, abs=1e-15)


def test_superposition_at_right_angle_is_transfer(flagship):
    res = propagate(flagship, SystemParams())
    assert (experiments.superposition_infidelity(res, math.pi / 2)
            == pytest.approx(experiments.transfer_infidelity(res), abs=1e-12))


def test_flagship_infidelity(flagship):
    res = propagate(flagship, SystemParams(), cfg=IntegratorConfig(1e-12, 1e-14))
    assert experiments.transfer_infidelity(res) < 1e-4


def test_sweep_spec_validation(flagship):
    with pytest.raises(ConfigError):
        SweepSpec("bogus", (1, 2), flagship)
    with pytest.raises(ConfigError):
        SweepSpec(PEAK_RABI, (2, 1), flagship)
    with pytest.raises(ConfigError):
        SweepSpec(PEAK_RABI, (0, 1), flagship)
    with pytest.raises(ConfigError):
        SweepSpec(MASK_WIDTH, (1, 2), pulses.Gaussian(20.0, 1.2))
    with pytest.raises(ConfigError):
        SweepSpec(PEAK_RABI, (1, 2), flagship, target=SUPERPOSITION)


def test_sweep_instances(flagship):
    spec = SweepSpec(SINGLE_PHOTON, (-1.0, 0.0, 2.5), flagship)
    desc, params = spec.instance(2.5)
    assert desc == flagship and params.delta == 2.5
    desc, _ = SweepSpec(MASK_WIDTH, (2.0, 3.0), flagship).instance(3.0)
    assert desc.mask.width == 3.0


def test_single_point_sweep_equals_direct_call(flagship):
    rec, = run_sweep(SweepSpec(PEAK_RABI, (20.0,), flagship), IntegratorConfig(), workers=1)
    res = propagate(flagship, SystemParams())
    p = np.abs(res.final.c) ** 2
    assert (rec.p1, rec.p2, rec.p3) == tuple(p)
    assert rec.infidelity == experiments.transfer_infidelity(res) and rec.status == "ok"


def test_sweep_is_deterministic_and_ordered(tmp_path, flagship):
    spec = SweepSpec(PEAK_RABI, np.linspace(5, 25, 5), flagship)
    a = experiments.write_sweep_csv(run_sweep(spec, workers=1), tmp_path / "a.csv", spec)
    b = experiments.write_sweep_csv(run_sweep(spec, workers=2), tmp_path / "b.csv", spec)
    assert a.read_bytes() == b.read_bytes()
    comments, header, rows = csvio.read_csv(a)
    assert header == experiments.SWEEP_HEADER
    assert [float(r[0]) for r in rows] == list(spec.grid)
    assert comments[0] == "swept: peak_rabi"
    for r in rows:
        p = [float(x) for x in r[1:4]]
        assert all(0 <= x <= 1 for x in p) and abs(sum(p) - 1) <= 1e-9


def test_sweep_records_point_errors(flagship):
    # a narrow window trips the edge check at the point level, not the sweep
    spec = SweepSpec(PEAK_RABI, (10.0, 20.0), flagship, SystemParams(window=(-2, 2)))
    recs = run_sweep(spec, workers=1)
    assert [r.status for r in recs] == ["WindowTooNarrow"] * 2
    assert all(math.isnan(r.infidelity) for r in recs)


def test_first_local_minimum():
    assert experiments.first_local_minimum([5, 4, 3, 4, 2]) == 2
    assert experiments.first_local_minimum([5, 4, 3]) == -1


def test_breakdown_requires_a_minimum(flagship):
    with pytest.raises(NoBreakdownDetected):
        experiments.breakdown_scan(flagship, [2.0, 4.0, 6.0], cfg=IntegratorConfig(), workers=1)


def test_breakdown_scan_report():
    g = pulses.Gaussian(1.0, 1.2)
    rep = experiments.breakdown_scan(g, np.linspace(1, 30, 30), cfg=IntegratorConfig(), workers=1)
    assert rep.index > 0 and rep.breakdown_area == pytest.approx(rep.area_grid[rep.index])
    assert rep.area_grid[0] == pytest.approx(pulses.areas(g, (-10, 10)).rms)


def test_adiabatic_lz_probability():
    p, res = experiments.adiabatic_transition_probability(pulses.LandauZener(1.0, 1.0))
    assert abs(p - math.exp(-math.pi / 2)) <= 1e-3
    assert res.norm_drift <= 1e-9
    with pytest.raises(ConfigError):
        experiments.adiabatic_transition_probability(pulses.Gaussian(1.0, 1.2))


def test_plot_script_refers_to_csv():
    s = experiments.plot_script("sweep.csv", "peak_rabi")
    assert "'sweep.csv'" in s and "using 1:5" in s
