"""Sweeps, infidelity metrics and the figure-level diagnostics built on them."""
from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from . import csvio, pulses
from .errors import ConfigError, NoBreakdownDetected, StirapError
from .hamiltonian import SystemParams, build_two_state, eigensystem
from .propagator import AmplitudeState, IntegratorConfig, propagate

PEAK_RABI = "peak_rabi"
SINGLE_PHOTON = "single_photon_detuning"
TWO_PHOTON = "two_photon_detuning"
MASK_WIDTH = "mask_width"
SWEPT = (PEAK_RABI, SINGLE_PHOTON, TWO_PHOTON, MASK_WIDTH)

FULL_TRANSFER = "transfer"
SUPERPOSITION = "superposition"


@dataclass(frozen=True)
class SweepSpec:
    swept: str
    grid: tuple
    base_descriptor: object
    base_params: SystemParams = SystemParams()
    target: str = FULL_TRANSFER
    alpha: float | None = None

    def __post_init__(self):
        if self.swept not in SWEPT:
            raise ConfigError(f"unknown swept parameter {self.swept!r}; expected one of {SWEPT}")
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise ConfigError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid[:-1], grid[1:])):
            raise ConfigError("sweep grid must be strictly increasing")
        if self.swept in (PEAK_RABI, MASK_WIDTH) and grid[0] <= 0:
            raise ConfigError(f"{self.swept} values must be positive")
        if self.swept == MASK_WIDTH and not isinstance(getattr(self.base_descriptor, "mask", None),
                                                       pulses.Hypergaussian):
            raise ConfigError("mask_width sweeps need a hypergaussian-masked descriptor")
        if self.target not in (FULL_TRANSFER, SUPERPOSITION):
            raise ConfigError(f"unknown sweep target {self.target!r}")
        if self.target == SUPERPOSITION and self.alpha is None:
            raise ConfigError("superposition target needs alpha")
        object.__setattr__(self, "grid", grid)

    def instance(self, value: float):
        """Descriptor and system parameters at one grid value."""
        desc, params = self.base_descriptor, self.base_params
        if self.swept == PEAK_RABI:
            desc = dataclasses.replace(desc, omega0=value)
        elif self.swept == MASK_WIDTH:
            desc = dataclasses.replace(desc, mask=dataclasses.replace(desc.mask, width=value))
        elif self.swept == SINGLE_PHOTON:
            params = dataclasses.replace(params, delta=value)
        else:
            params = dataclasses.replace(params, delta2=value)
        return desc, params


@dataclass(frozen=True)
class SweepRecord:
    value: float
    p1: float
    p2: float
    p3: float
    infidelity: float
    norm_loss: float
    status: str = "ok"

    def row(self):
        return [self.value, self.p1, self.p2, self.p3, self.infidelity, self.norm_loss, self.status]


def transfer_infidelity(result) -> float:
    """1 - P3 at the end of a three-state run."""
    return float(1.0 - abs(result.final.c[2]) ** 2)


def superposition_infidelity(result, alpha: float) -> float:
    """1 - |cos(alpha) c1 - sin(alpha) c3|^2 at the end of a three-state run."""
    c = result.final.c
    return float(1.0 - abs(math.cos(alpha) * c[0] - math.sin(alpha) * c[2]) ** 2)


def _point(args):
    spec, cfg, value = args
    try:
        desc, params = spec.instance(value)
        res = propagate(desc, params, cfg=cfg)
    except StirapError as exc:
        nan = float("nan")
        return SweepRecord(value, nan, nan, nan, nan, nan, type(exc).__name__)
    p = np.abs(res.final.c) ** 2
    if spec.target == SUPERPOSITION:
        inf = superposition_infidelity(res, spec.alpha)
    else:
        inf = transfer_infidelity(res)
    return SweepRecord(value, float(p[0]), float(p[1]), float(p[2]), inf,
                       float(1.0 - p.sum()))


def run_sweep(spec: SweepSpec, cfg: IntegratorConfig = IntegratorConfig(),
              workers: int | None = None) -> list[SweepRecord]:
    """One record per grid value, in grid order.

    Points run in a process pool of ``workers`` (default: available CPUs);
    ``workers=1`` runs serially.  A failing point yields a row whose status is
    the error class name; the sweep continues.
    """
    tasks = [(spec, cfg, v) for v in spec.grid]
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(tasks) == 1:
        return [_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(_point, tasks))


SWEEP_HEADER = ["value", "p1", "p2", "p3", "infidelity", "norm_loss", "status"]


def write_sweep_csv(records, path, spec: SweepSpec | None = None, comments=()):
    head = []
    if spec is not None:
        head.append(f"swept: {spec.swept}")
        cfg = pulses.to_config(spec.base_descriptor)
        head.append("pulse: " + " ".join(f"{k}={v!r}" for k, v in cfg.items()))
        p = spec.base_params
        head.append(f"system: delta={p.delta!r} delta2={p.delta2!r} gamma={p.gamma!r} "
                    f"window={p.window[0]!r},{p.window[1]!r}")
        head.append(f"target: {spec.target}" + (f" alpha={spec.alpha!r}" if spec.alpha else ""))
    return csvio.write_csv(path, SWEEP_HEADER, [r.row() for r in records], [*head, *comments])


def plot_script(csv_name: str, xlabel: str, title: str = "") -> str:
    """gnuplot script drawing log10 infidelity against the swept value."""
    return "\n".join([
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        "set logscale y",
        "set format y '10^{%L}'",
        f"set xlabel '{xlabel}'",
        "set ylabel 'infidelity'",
        f"set title '{title}'",
        f"plot '{csv_name}' using 1:5 with lines lw 2",
        "",
    ])


# ---------------------------------------------------------------------------
# breakdown area


@dataclass
class BreakdownReport:
    omega_grid: np.ndarray
    area_grid: np.ndarray
    infidelity: np.ndarray
    index: int
    breakdown_area: float
    breakdown_omega: float
    area_ratio: float          # R = A / A_o from pulses.areas
    monotone_before: bool


def first_local_minimum(values) -> int:
    """Index of the first interior point lower than both neighbours, or -1."""
    v = np.asarray(values, dtype=float)
    for i in range(1, v.size - 1):
        if v[i] < v[i - 1] and v[i] < v[i + 1]:
            return i
    return -1


def breakdown_scan(desc, omega_grid, params: SystemParams = SystemParams(),
                   cfg: IntegratorConfig = IntegratorConfig(1e-13, 1e-15),
                   workers: int | None = None) -> BreakdownReport:
    """Locate where the exponential decline of infidelity with area turns oscillatory.

    The area axis is the rms pulse area Omega0 * A_rms(Omega0 = 1).  The
    breakdown is the first local minimum of log10 infidelity (3-point window).
    ``monotone_before`` checks that every step before it drops the infidelity
    or raises it by at most 10 %.
    """
    spec = SweepSpec(PEAK_RABI, tuple(omega_grid), desc, params)
    recs = run_sweep(spec, cfg, workers)
    bad = [r for r in recs if r.status != "ok"]
    if bad:
        raise NoBreakdownDetected(f"{len(bad)} sweep point(s) failed ({bad[0].status})")
    inf = np.array([max(r.infidelity, 1e-300) for r in recs])
    unit = pulses.areas(dataclasses.replace(desc, omega0=1.0), params.window)
    omegas = np.asarray(spec.grid)
    area = omegas * unit.rms
    k = first_local_minimum(np.log10(inf))
    if k < 0:
        raise NoBreakdownDetected("no local minimum of the infidelity on this grid; extend it")
    mono = bool(np.all(inf[1:k + 1] <= 1.1 * inf[:k]))
    return BreakdownReport(omegas, area, inf, k, float(area[k]), float(omegas[k]),
                           float(unit.ratio), mono)


# ---------------------------------------------------------------------------
# two-state helpers and the RWA estimate


def adiabatic_transition_probability(desc, half_width: float = 200.0,
                                     cfg: IntegratorConfig = IntegratorConfig(1e-13, 1e-15)):
    """Nonadiabatic transition probability of a two-state family by direct propagation.

    Starts in the upper adiabatic state at -half_width and returns the
    population of the lower adiabatic state at +half_width, which removes the
    slowly decaying finite-window oscillation of diabatic populations.
    """
    if not desc.two_state:
        raise ConfigError("adiabatic_transition_probability needs a two-state family")
    lo, hi = -half_width, half_width
    start = eigensystem(build_two_state(*desc._envelopes(lo), lo))[1][:, 1]
    end = eigensystem(build_two_state(*desc._envelopes(hi), hi))[1][:, 0]
    res = propagate(desc, SystemParams(window=(lo, hi)), AmplitudeState(lo, start), cfg)
    return float(abs(np.vdot(end, res.final.c)) ** 2), res


def rwa_error_estimate(omega_carrier: float, omega_rabi: float, duration: float) -> float:
    """(duration * omega_rabi^2 / omega_carrier)^2, evaluated in decimal arithmetic.

    The inputs are taken at their shortest decimal representation so that
    round-number magnitudes come out as the nearest double to the exact value.
    """
    if not (omega_carrier > 0 and omega_rabi >= 0 and duration > 0):
        raise ConfigError("rwa_error_estimate needs omega_carrier > 0, omega_rabi >= 0, "
                          "duration > 0")
    w, r, d = (Decimal(repr(float(x))) for x in (omega_carrier, omega_rabi, duration))
    return float((d * r * r / w) ** 2)
