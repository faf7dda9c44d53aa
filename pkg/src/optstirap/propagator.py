"""Adaptive integration of i dc/dt = H(t) c for two- and three-component states.

Descriptor-driven runs use the compiled Dormand-Prince 5(4) pair in
:mod:`optstirap._core` (``method="dopri5"``).  :func:`integrate` accepts an
arbitrary Hamiltonian callable and steps scipy's RK45/DOP853 instead; it is
slower but independent of the compiled kernels.  Amplitudes stay in the bare
(diabatic) basis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853, RK45

from . import _core, csvio, pulses
from .errors import ConfigError, StepUnderflow
from .hamiltonian import SystemParams

_METHODS = {"RK45": RK45, "DOP853": DOP853}


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = np.inf
    initial_step: float | None = None
    dense_output_samples: int = 0
    method: str = "dopri5"
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("integrator tolerances must be positive")
        if self.method != "dopri5" and self.method not in _METHODS:
            raise ConfigError(f"unknown integrator method {self.method!r}")
        if self.dense_output_samples < 0:
            raise ConfigError("dense_output_samples must be >= 0")


@dataclass
class AmplitudeState:
    t: float
    c: np.ndarray

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.c) ** 2


@dataclass
class PropagationResult:
    final: AmplitudeState
    times: np.ndarray
    amplitudes: np.ndarray
    norm_drift: float
    steps_taken: int
    rejected_steps: int
    error_estimate: float
    meta: dict = field(default_factory=dict)

    @property
    def trajectory(self) -> list[AmplitudeState]:
        return [AmplitudeState(t, c) for t, c in zip(self.times, self.amplitudes)]

    @property
    def populations(self) -> np.ndarray:
        """Sampled populations, shape (n_samples, dim)."""
        return np.abs(self.amplitudes) ** 2


def integrate(hamiltonian, span, c0, cfg: IntegratorConfig = IntegratorConfig()) -> PropagationResult:
    """Integrate ``i dc/dt = hamiltonian(t) @ c`` over ``span`` (may run backwards).

    ``hamiltonian`` is a callable returning the matrix at time t.  Samples are
    taken at ``cfg.dense_output_samples`` equally spaced times (always
    including both endpoints).
    """
    t0, t1 = map(float, span)
    c0 = np.asarray(c0, dtype=complex)

    def rhs(t, c):
        return -1j * (hamiltonian(t) @ c)

    return _run(rhs, t0, t1, c0, cfg)


def _run(rhs, t0, t1, c0, cfg):
    cls = _METHODS.get(cfg.method, RK45)
    solver = cls(rhs, t0, c0, t1, rtol=cfg.rel_tol, atol=cfg.abs_tol,
                 max_step=cfg.max_step, first_step=cfg.initial_step)
    initial_evals = solver.nfev
    n = max(cfg.dense_output_samples, 2)
    grid = np.linspace(t0, t1, n)
    out = np.empty((n, c0.size), dtype=complex)
    out[0] = c0
    k = 1
    accepted = 0
    dense_evals = 0
    forward = t1 > t0
    while solver.status == "running":
        solver.step()
        if solver.status == "failed":
            raise StepUnderflow(f"integrator failed at t={solver.t:.6g}: step size underflow")
        accepted += 1
        t_now = solver.t
        if k < n - 1 and ((grid[k] <= t_now) if forward else (grid[k] >= t_now)):
            before = solver.nfev
            interp = solver.dense_output()
            dense_evals += solver.nfev - before
            while k < n - 1 and ((grid[k] <= t_now) if forward else (grid[k] >= t_now)):
                out[k] = interp(grid[k])
                k += 1
    out[-1] = solver.y
    grid[-1] = solver.t
    attempts = (solver.nfev - initial_evals - dense_evals) // solver.n_stages
    norm0 = np.vdot(c0, c0).real
    drift = float(np.max(np.abs(np.sum(np.abs(out) ** 2, axis=1) - norm0)))
    scale = max(1.0, float(np.max(np.abs(out))))
    return PropagationResult(
        final=AmplitudeState(float(solver.t), solver.y.copy()),
        times=grid,
        amplitudes=out,
        norm_drift=drift,
        steps_taken=accepted,
        rejected_steps=max(attempts - accepted, 0),
        error_estimate=accepted * (cfg.rel_tol * scale + cfg.abs_tol),
    )


def _finish(c0, grid, samples, y, accepted, rejected, cfg):
    norm0 = np.vdot(c0, c0).real
    drift = float(np.max(np.abs(np.sum(np.abs(samples) ** 2, axis=1) - norm0)))
    scale = max(1.0, float(np.max(np.abs(samples))))
    return PropagationResult(
        final=AmplitudeState(float(grid[-1]), y.copy()),
        times=grid,
        amplitudes=samples,
        norm_drift=drift,
        steps_taken=int(accepted),
        rejected_steps=int(rejected),
        error_estimate=accepted * (cfg.rel_tol * scale + cfg.abs_tol),
    )


def propagate_system(kind: int, desc, span, c0, cfg: IntegratorConfig = IntegratorConfig(),
                     system=(0.0, 0.0, 0.0)) -> PropagationResult:
    """Run one of the compiled system kinds (see :mod:`optstirap._core`) over ``span``.

    ``system`` holds (delta, delta2, gamma) for three-state runs and
    (delta, 0, 0) for the eliminated effective system.
    """
    code, p = _core.family_code(desc)
    t0, t1 = map(float, span)
    c0 = np.asarray(c0, dtype=complex)
    grid = np.linspace(t0, t1, max(cfg.dense_output_samples, 2))
    if cfg.method != "dopri5":
        hfun = _python_hamiltonian(kind, desc, system)
        return integrate(hfun, span, c0, cfg)
    y, samples, acc, rej, status = _core.dopri54(
        kind, code, p, np.asarray(system, dtype=float), t0, t1, c0.copy(),
        cfg.rel_tol, cfg.abs_tol, float(cfg.max_step), float(cfg.initial_step or 0.0),
        grid, int(cfg.max_steps))
    if status == -1:
        raise StepUnderflow(f"step size underflow before reaching t={t1}")
    if status == -2:
        raise StepUnderflow(f"exceeded {cfg.max_steps} steps before reaching t={t1}")
    return _finish(c0, grid, samples, y, acc, rej, cfg)


def _python_hamiltonian(kind, desc, system):
    """Pure-Python Hamiltonian for the scipy route (mirrors the compiled kernels)."""
    from .hamiltonian import three_state_matrix

    delta, delta2, gamma = system
    env = desc._envelopes

    def h(t):
        a, b = env(t)
        if kind == _core.THREE_STATE:
            return three_state_matrix(a, b, delta, delta2, gamma)
        if kind == _core.TWO_STATE:
            return np.array([[0.0, 0.5 * a], [0.5 * a, b]])
        if kind == _core.MAPPED_FRAME:
            r, w = 0.5 * np.hypot(a, b), desc._angle_rate(t)
            return 0.5 * np.array([[-r, -1j * w], [1j * w, r]])
        if kind == _core.ELIMINATED:
            om, de = -a * b / (2 * delta), (a * a - b * b) / (4 * delta)
            return 0.5 * np.array([[-de, om], [om, de]])
        return 0.5 * np.array([[b, a], [a, -b]])
    return h


def propagate(desc, params: SystemParams, initial: AmplitudeState | None = None,
              cfg: IntegratorConfig = IntegratorConfig()) -> PropagationResult:
    """Propagate from ``initial`` (default psi_1 at the window start) to the window end.

    Two-state families use H = 1/2 [[0, Omega], [Omega, 2 Delta]] and ignore the
    detunings in ``params``; three-state families use the STIRAP Hamiltonian.
    """
    t0, t1 = params.window
    dim = 2 if desc.two_state else 3
    if initial is None:
        initial = AmplitudeState(t0, np.eye(dim, dtype=complex)[0])
    c0 = np.asarray(initial.c, dtype=complex)
    if c0.size != dim:
        raise ConfigError(f"initial state has {c0.size} components, expected {dim}")
    if np.vdot(c0, c0).real > 1 + 1e-9:
        raise ConfigError("initial state norm exceeds 1")
    if desc.two_state:
        kind, system = _core.TWO_STATE, (0.0, 0.0, 0.0)
    else:
        pulses.check_window(desc, params.window)
        kind, system = _core.THREE_STATE, (params.delta, params.delta2, params.gamma)
    result = propagate_system(kind, desc, (float(initial.t), t1), c0, cfg, system)
    result.meta.update(family=type(desc).__name__, gamma=params.gamma)
    return result


def final_populations(result: PropagationResult) -> np.ndarray:
    return np.abs(result.final.c) ** 2


def dark_state_overlap(result: PropagationResult, desc) -> np.ndarray:
    """|<dark(t)|c(t)>|^2 at each saved sample (three-state runs)."""
    theta = pulses.mixing_angle(desc, result.times)
    c = result.amplitudes
    return np.abs(np.cos(theta) * c[:, 0] - np.sin(theta) * c[:, 2]) ** 2


def write_trajectory_csv(result: PropagationResult, path):
    dim = result.amplitudes.shape[1]
    header = ["t"]
    for k in range(1, dim + 1):
        header += [f"re_c{k}", f"im_c{k}"]
    header += [f"p{k}" for k in range(1, dim + 1)]
    rows = []
    for t, c in zip(result.times, result.amplitudes):
        row = [t]
        for a in c:
            row += [a.real, a.imag]
        row += list(np.abs(c) ** 2)
        rows.append(row)
    return csvio.write_csv(path, header, rows)
