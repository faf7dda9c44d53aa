"""RWA Hamiltonians, their eigensystems and the STIRAP dark state (hbar = 1)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pulses
from .errors import ConfigError, NonHermitianInput


@dataclass(frozen=True)
class SystemParams:
    """Detunings, loss rate and time window of one simulation instance.

    ``delta`` is the single-photon (pump) detuning, ``delta2`` the two-photon
    (Raman) detuning entering as H33, ``gamma`` a loss rate of the
    intermediate state entering as -i*gamma/2 on H22.
    """

    delta: float = 0.0
    delta2: float = 0.0
    gamma: float = 0.0
    window: tuple[float, float] = (-10.0, 10.0)
    T: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError("gamma must be non-negative")
        if not self.window[0] < self.window[1]:
            raise ConfigError("window start must precede window end")
        object.__setattr__(self, "window", (float(self.window[0]), float(self.window[1])))


@dataclass(frozen=True)
class HamiltonianMatrix:
    t: float
    entries: np.ndarray

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class DarkState:
    amplitudes: np.ndarray
    theta: float


def three_state_matrix(omega_p, omega_s, delta=0.0, delta2=0.0, gamma=0.0) -> np.ndarray:
    """H = 1/2 [[0, Op, 0], [Op, 2D - i G, Os], [0, Os, 2 d]]."""
    dtype = complex if gamma else float
    h = np.zeros((3, 3), dtype=dtype)
    h[0, 1] = h[1, 0] = 0.5 * omega_p
    h[1, 2] = h[2, 1] = 0.5 * omega_s
    h[1, 1] = delta - 0.5j * gamma if gamma else delta
    h[2, 2] = delta2
    return h


def build_three_state(desc, params: SystemParams, t: float) -> HamiltonianMatrix:
    omega_p, omega_s = pulses.evaluate(desc, float(t))
    return HamiltonianMatrix(
        float(t), three_state_matrix(omega_p, omega_s, params.delta, params.delta2, params.gamma))


def build_two_state(omega: float, delta: float, t: float = 0.0) -> HamiltonianMatrix:
    """H = 1/2 [[0, Omega], [Omega, 2 Delta]]."""
    return HamiltonianMatrix(float(t), np.array([[0.0, 0.5 * omega], [0.5 * omega, delta]]))


def dark_state(desc, t: float) -> DarkState:
    """Zero-eigenvalue state cos(theta) psi1 - sin(theta) psi3."""
    theta = float(pulses.mixing_angle(desc, t))
    return DarkState(np.array([np.cos(theta), 0.0, -np.sin(theta)]), theta)


def eigensystem(h: HamiltonianMatrix | np.ndarray):
    """Ascending eigenvalues and orthonormal eigenvectors (columns) of a Hermitian H."""
    m = h.entries if isinstance(h, HamiltonianMatrix) else np.asarray(h)
    scale = max(np.linalg.norm(m), np.finfo(float).tiny)
    if np.max(np.abs(m - m.conj().T)) > 1e-14 * scale:
        raise NonHermitianInput("eigensystem requires a Hermitian matrix (gamma = 0)")
    return np.linalg.eigh(m)
