import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optstirap import csvio, ddp, pulses
from optstirap.errors import BoxContainsPole, RealAxisZero
from optstirap.reduction import resonant_reduce


def constant_model(om, de):
    zero = lambda t: 0 * t
    return ddp.TwoStateModel(lambda t: om + 0 * t, lambda t: de + 0 * t, zero, zero)


def lz_model(omega0=1.0, rate=1.0):
    return ddp.TwoStateModel.from_descriptor(pulses.LandauZener(omega0, rate))


def gaussian_model(tau=1.2):
    return ddp.as_model(resonant_reduce(pulses.Gaussian(20.0, tau)))


def gaussian_zeros(tau, im_max):
    """exp(4 tau t) = -1 on Omega_p^2 + Omega_s^2 = 0: t = i pi (2k + 1) / (4 tau)."""
    out, k = [], 0
    while math.pi * (2 * k + 1) / (4 * tau) < im_max:
        out.append(1j * math.pi * (2 * k + 1) / (4 * tau))
        k += 1
    return out


def test_quasienergy_real_and_branch():
    assert ddp.quasienergy(constant_model(3.0, 4.0), 0.0) == pytest.approx(5.0)
    lz = lz_model()
    assert abs(ddp.quasienergy(lz, 1j)) < 1e-15
    e = ddp.quasienergy(lz, 0.3 + 0.4j)
    assert ddp.quasienergy(lz, 0.3 - 0.4j) == pytest.approx(np.conj(e))
    assert ddp.quasienergy(lz, 0.3 + 0.4j, previous=-e) == pytest.approx(-e)


def test_landau_zener_single_point():
    box = ddp.SearchBox(-5, 5, 0.1, 5)
    pts = ddp.find_transition_points(lz_model(), box)
    assert len(pts) == 1
    assert abs(pts[0].t0 - 1j) <= 1e-12 and pts[0].multiplicity == 1


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 3.0])
def test_landau_zener_d_integral(k):
    # Omega = 1, rate = 1/k: zero at t0 = i k and D = int_0^{i k} sqrt(1 + t^2/k^2) dt = i pi k / 4
    model = lz_model(1.0, 1.0 / k)
    d, _ = ddp.d_integral(model, 1j * k)
    assert d.imag == pytest.approx(math.pi * k / 4, rel=1e-12)
    assert abs(d.real) <= 1e-12


def test_landau_zener_residue_factor_magnitude():
    g = ddp.residue_factor(lz_model(), 1j)
    # with the eps > 0 branch on the real axis the residue is -1
    assert abs(abs(g) - 1) <= 1e-4
    assert g.real == pytest.approx(-1, abs=1e-10)


def test_residue_radius_robustness():
    vals = [ddp.residue_factor(lz_model(), 1j, radius=r) for r in (0.05, 0.2, 0.5)]
    assert max(abs(v - vals[0]) for v in vals) <= 1e-5


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 3.0])
def test_landau_zener_estimate(k):
    est = ddp.estimate(lz_model(math.sqrt(k), 1.0), ddp.SearchBox(-5, 5, 0.1, 5), grid=(16, 16))
    assert est.mode == ddp.SINGLE and len(est.points) == 1
    assert abs(math.log(est.probability) + math.pi * k / 2) <= 1e-6


@pytest.mark.parametrize("grid", [(8, 8), (16, 16), (40, 40)])
def test_zero_finder_completeness(grid):
    tau = 1.2
    pts = ddp.find_transition_points(gaussian_model(tau), grid=grid)
    box = ddp.default_box(gaussian_model(tau))
    expected = gaussian_zeros(tau, box.im_hi)
    assert len(pts) == len(expected) == 2
    for p, z in zip(pts, expected):
        assert abs(p.t0 - z) <= 1e-10


def test_constant_eps_has_no_points():
    model = ddp.as_model(pulses.TwoStateConstantEps(2.0, pulses.Sigmoid(3.0)))
    for box in (None, ddp.SearchBox(-3, 3, 0.05, 0.45)):
        assert ddp.find_transition_points(model, box, grid=(16, 16)) == []
    est = ddp.estimate(model)
    assert est.mode == ddp.NONE and est.probability == 0


def test_masked_optimized_pair_has_no_points_in_overlap():
    flagship = pulses.DdpOptimized(20.0, pulses.Hypergaussian(3, 2.0), pulses.Sigmoid(4.0))
    est = ddp.estimate(ddp.as_model(resonant_reduce(flagship), window=(-2, 2)))
    assert est.mode == ddp.NONE
    assert "box-relative" in est.summary()


def test_box_with_pole_rejected():
    flagship = pulses.DdpOptimized(20.0, pulses.Hypergaussian(3, 2.0), pulses.Sigmoid(4.0))
    with pytest.raises(BoxContainsPole):
        ddp.find_transition_points(resonant_reduce(flagship), ddp.SearchBox(-1, 1, 0.1, 1.0))


def test_real_axis_zero_rejected():
    zero = lambda t: 0 * t
    model = ddp.TwoStateModel(zero, lambda t: t, zero, lambda t: 1 + 0 * t)
    with pytest.raises(RealAxisZero):
        ddp.estimate(model, ddp.SearchBox(-1, 1, 0.1, 1))


def test_contour_invariance():
    lz = lz_model()
    ref, _ = ddp.d_integral(lz, 1j, "straight")
    alt, _ = ddp.d_integral(lz, 1j, [0, 1, 1 + 1j, 1j])
    assert abs(alt - ref) <= 1e-8 * abs(ref)
    g = gaussian_model()
    pts = [p.t0 for p in ddp.find_transition_points(g)]
    t0 = pts[0]
    ref, _ = ddp.d_integral(g, t0, others=pts)
    alt, _ = ddp.d_integral(g, t0, [0, 0.5, 0.5 + 1j * t0.imag, t0], others=pts)
    assert abs(alt - ref) <= 1e-8 * abs(ref)


def test_d_scales_with_eps():
    a, _ = ddp.d_integral(lz_model(1.0, 1.0), 1j)
    b, _ = ddp.d_integral(lz_model(2.0, 2.0), 1j)
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_d_conjugate_symmetry():
    g = gaussian_model()
    t0 = ddp.find_transition_points(g)[0].t0
    up, _ = ddp.d_integral(g, t0, "straight")
    down, _ = ddp.d_integral(g, np.conj(t0), "straight")
    assert down == pytest.approx(np.conj(up), rel=1e-12)


def test_gaussian_estimate_modes():
    est = ddp.estimate(gaussian_model())
    assert est.mode == ddp.MULTI and len(est.points) == 2
    assert {round(p.gamma_k.real) for p in est.points} == {1, -1}
    dom = min(est.points, key=lambda p: p.im_d)
    assert est.single_probability == pytest.approx(math.exp(-2 * dom.im_d))
    assert 0 <= est.probability <= 1 and not est.clamped


def test_estimate_csv(tmp_path):
    est = ddp.estimate(lz_model())
    comments, header, rows = csvio.read_csv(est.write_csv(tmp_path / "ddp.csv"))
    assert header[:4] == ["re_t0", "im_t0", "re_D", "im_D"]
    assert len(rows) == 1 and float(rows[0][3]) == pytest.approx(math.pi / 4)
    assert any(c.startswith("mode: ") for c in comments)


@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_property_lz_zero_and_phase(omega0, rate):
    model = lz_model(omega0, rate)
    t0 = 1j * omega0 / rate
    box = ddp.SearchBox(-3 * t0.imag, 3 * t0.imag, 0.05 * t0.imag, 2 * t0.imag)
    pts = ddp.find_transition_points(model, box, grid=(8, 8))
    assert len(pts) == 1 and abs(pts[0].t0 - t0) <= 1e-10 * abs(t0)
    d, _ = ddp.d_integral(model, pts[0].t0)
    assert d.imag == pytest.approx(math.pi * omega0**2 / (4 * rate), rel=1e-10)
