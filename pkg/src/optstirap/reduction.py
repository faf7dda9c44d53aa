"""Two-state reductions of the three-state STIRAP problem.

Resonant branch (Delta = 0): the effective system has coupling Omega_p and
detuning Omega_s, H = 1/2 [[Omega_s, Omega_p], [Omega_p, -Omega_s]], whose
splitting sqrt(Omega_p^2 + Omega_s^2) is what the DDP optimisation keeps
constant.  The amplitude map :func:`map_amplitudes` carries the mixing angle
theta(t); the two-state amplitudes it consumes are those of the dark/bright
frame system

    H_b = 1/2 [[-Omega_rms/2, -i theta'], [i theta', Omega_rms/2]],

for which the map is an exact change of variables (checked by
:func:`consistency_check`).

Eliminated branch (|Delta| large): c2 is slaved to c1, c3 and the effective
coupling/detuning follow from setting dc2/dt = 0.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _core, csvio, pulses
from .errors import DetuningTooSmall, NotNormalized
from .hamiltonian import SystemParams
from .propagator import IntegratorConfig, propagate, propagate_system

RESONANT = "resonant"
ELIMINATED = "eliminated"


@dataclass(frozen=True)
class EffectiveTwoState:
    desc: object
    regime: str
    delta: float = 0.0

    def omega_eff(self, t):
        p, s = self.desc._envelopes(t)
        if self.regime == RESONANT:
            return p
        return -p * s / (2 * self.delta)

    def delta_eff(self, t):
        p, s = self.desc._envelopes(t)
        if self.regime == RESONANT:
            return s
        return (p * p - s * s) / (4 * self.delta)

    def derivatives(self, t):
        """Closed-form (d omega_eff/dt, d delta_eff/dt), valid at complex t."""
        p, s = self.desc._envelopes(t)
        dp, ds = self.desc._derivatives(t)
        if self.regime == RESONANT:
            return dp, ds
        return (-(dp * s + p * ds) / (2 * self.delta),
                (p * dp - s * ds) / (2 * self.delta))

    def splitting(self, t):
        return np.sqrt(self.omega_eff(t) ** 2 + self.delta_eff(t) ** 2)

    def hamiltonian(self, t) -> np.ndarray:
        om, de = self.omega_eff(t), self.delta_eff(t)
        if self.regime == RESONANT:
            return 0.5 * np.array([[de, om], [om, -de]])
        return 0.5 * np.array([[-de, om], [om, de]])


def resonant_reduce(desc) -> EffectiveTwoState:
    return EffectiveTwoState(desc, RESONANT)


def eliminate(desc, delta: float) -> EffectiveTwoState:
    """Adiabatic elimination of the intermediate state at large detuning.

    Requires |delta| >= 3 * peak Rabi frequency; warns below 10x.
    """
    ratio = abs(delta) / desc.peak
    if ratio < 3:
        raise DetuningTooSmall(f"|Delta| = {abs(delta):g} is below 3 x peak Rabi frequency")
    if ratio < 10:
        warnings.warn(f"|Delta|/Omega0 = {ratio:.3g} < 10: elimination is a rough approximation",
                      stacklevel=2)
    return EffectiveTwoState(desc, ELIMINATED, float(delta))


def map_amplitudes(b, theta):
    """Three-state amplitudes (c1, c2, c3) from two-state amplitudes b and angle theta.

    Works elementwise when ``b`` has shape (..., 2) and ``theta`` broadcasts.
    """
    b = np.asarray(b, dtype=complex)
    norm = np.sum(np.abs(b) ** 2, axis=-1)
    if np.any(np.abs(norm - 1) > 1e-9):
        raise NotNormalized(f"|b|^2 = {norm} differs from 1 by more than 1e-9")
    b1, b2 = b[..., 0], b[..., 1]
    x = np.conj(b1) * b2
    re = 2 * x.real
    w = np.abs(b1) ** 2 - np.abs(b2) ** 2
    s, c = np.sin(theta), np.cos(theta)
    return np.stack([re * s + w * c, 2j * x.imag * np.ones_like(s), re * c - w * s], axis=-1)


@dataclass
class ConsistencyReport:
    regime: str
    times: np.ndarray
    full: np.ndarray      # (n, 3) populations from the three-state run
    mapped: np.ndarray    # (n, 3) populations from the reduced run
    max_deviation: float
    final_deviation: float

    @property
    def deviation(self) -> np.ndarray:
        return np.max(np.abs(self.full - self.mapped), axis=1)

    def write_csv(self, path):
        header = ["t", "P1_full", "P2_full", "P3_full",
                  "P1_mapped", "P2_mapped", "P3_mapped", "deviation"]
        rows = [[t, *f, *m, d] for t, f, m, d in
                zip(self.times, self.full, self.mapped, self.deviation)]
        return csvio.write_csv(path, header, rows, comments=[f"regime: {self.regime}"])


def consistency_check(desc, params: SystemParams, cfg: IntegratorConfig = IntegratorConfig(),
                      regime: str | None = None, samples: int = 201) -> ConsistencyReport:
    """Compare a direct three-state run with the reduced two-state run mapped back.

    Regime defaults to resonant for Delta = 0 and eliminated otherwise.  Both
    runs start from psi_1 at the window start; on the resonant branch that is
    b = (cos(theta0/2), sin(theta0/2)), which tends to b = (1, 0) as theta0 -> 0.
    """
    regime = regime or (RESONANT if params.delta == 0 else ELIMINATED)
    run_cfg = IntegratorConfig(cfg.rel_tol, cfg.abs_tol, cfg.max_step, cfg.initial_step,
                               max(samples, cfg.dense_output_samples), cfg.method, cfg.max_steps)
    full = propagate(desc, params, cfg=run_cfg)
    t0, t1 = params.window
    if regime == RESONANT:
        half = 0.5 * float(pulses.mixing_angle(desc, t0))
        b0 = [math.cos(half), math.sin(half)]
        b = propagate_system(_core.MAPPED_FRAME, desc, (t0, t1), b0, run_cfg).amplitudes
        theta = pulses.mixing_angle(desc, full.times)
        mapped = np.abs(map_amplitudes(b, theta)) ** 2
    else:
        eliminate(desc, params.delta)
        c13 = propagate_system(_core.ELIMINATED, desc, (t0, t1), [1, 0], run_cfg,
                               system=(params.delta, 0.0, 0.0)).amplitudes
        p, s = desc._envelopes(full.times)
        c2 = -(p * c13[:, 0] + s * c13[:, 1]) / (2 * params.delta)
        mapped = np.abs(np.column_stack([c13[:, 0], c2, c13[:, 1]])) ** 2
    pops = full.populations
    dev = np.max(np.abs(pops - mapped), axis=1)
    return ConsistencyReport(regime, full.times, pops, mapped, float(dev.max()), float(dev[-1]))
