"""Analytic pump/Stokes pulse families.

All families are immutable and evaluable at real *and* complex time; the
complex continuation is what the DDP analysis integrates along.  Time is in
units of the pulse width ``T`` and frequencies in units of ``1/T``.

Three-state families return ``(omega_p, omega_s)``.  The two-state families
(:class:`TwoStateConstantEps`, :class:`LandauZener`) return the coupling and
detuning ``(omega, delta)`` of the two-state Hamiltonian instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize

from .errors import ConfigError, DegenerateAngle, PoleProximity, WindowTooNarrow

#: Radius (in units of T) around a shape-function pole inside which complex
#: evaluation is refused.
POLE_EXCLUSION = 1e-3
#: Relative envelope floor (times the peak Rabi frequency).
ENVELOPE_FLOOR = 1e-15
#: Relative edge floor used when checking that a window covers the pulses.
EDGE_FLOOR = 1e-8


def _is_real(t) -> bool:
    return np.isrealobj(t)


def _expit(z):
    """Logistic function, overflow-safe for real and complex arguments."""
    z = np.asarray(z)
    if _is_real(z):
        from scipy.special import expit

        return expit(z)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        pos = 1.0 / (1.0 + np.exp(-z))
        ez = np.exp(z)
        neg = ez / (1.0 + ez)
    return np.where(z.real >= 0, pos, neg)


# ---------------------------------------------------------------------------
# shape and mask functions


@dataclass(frozen=True)
class Sigmoid:
    """f(t) = 1 / (1 + exp(-lambda t / T)), rising monotonically from 0 to 1."""

    steepness: float = 4.0
    T: float = 1.0

    def __post_init__(self):
        if not self.steepness > 0 or not self.T > 0:
            raise ConfigError("sigmoid steepness and T must be positive")

    def value(self, t):
        return _expit(self.steepness * np.asarray(t) / self.T)

    def complement(self, t):
        """1 - f(t), computed without cancellation."""
        return _expit(-self.steepness * np.asarray(t) / self.T)

    def rate(self, t):
        k = self.steepness / self.T
        return k * self.value(t) * self.complement(t)

    def pole_distance(self, t):
        """Distance from t to the nearest pole i*pi*T*(2k+1)/lambda."""
        t = np.asarray(t, dtype=complex)
        spacing = 2 * math.pi * self.T / self.steepness
        first = math.pi * self.T / self.steepness
        k = np.round((t.imag - first) / spacing)
        nearest = first + k * spacing
        return np.abs(t - 1j * nearest)

    def poles_between(self, im_lo: float, im_hi: float) -> list[complex]:
        spacing = 2 * math.pi * self.T / self.steepness
        first = math.pi * self.T / self.steepness
        out = []
        k_lo = math.ceil((im_lo - first) / spacing)
        k_hi = math.floor((im_hi - first) / spacing)
        for k in range(k_lo, k_hi + 1):
            out.append(1j * (first + k * spacing))
        return out


@dataclass(frozen=True)
class Hypergaussian:
    """F(t) = exp(-(t/T0)^(2n)); n = 1 is a Gaussian."""

    order: int = 3
    width: float = 2.0

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ConfigError("hypergaussian order n must be a positive integer")
        if not self.width > 0:
            raise ConfigError("mask width T0 must be positive")

    def value(self, t):
        return np.exp(-((np.asarray(t) / self.width) ** (2 * self.order)))

    def rate(self, t):
        t = np.asarray(t)
        n2 = 2 * self.order
        return -n2 * t ** (n2 - 1) / self.width**n2 * self.value(t)


@dataclass(frozen=True)
class ConstantMask:
    def value(self, t):
        return np.ones_like(np.asarray(t), dtype=np.result_type(t, float))

    def rate(self, t):
        return np.zeros_like(np.asarray(t), dtype=np.result_type(t, float))


# ---------------------------------------------------------------------------
# pulse families


class PulseFamily:
    """Common surface of all pulse descriptors."""

    two_state = False
    shape = None

    def pole_distance(self, t):
        if self.shape is None:
            return np.full(np.shape(t), np.inf)
        return self.shape.pole_distance(t)

    def poles_between(self, im_lo, im_hi):
        if self.shape is None:
            return []
        return self.shape.poles_between(im_lo, im_hi)

    @property
    def peak(self) -> float:
        return self.omega0

    # subclasses implement _envelopes, _derivatives, _angle, _angle_rate


@dataclass(frozen=True)
class DdpOptimized(PulseFamily):
    omega0: float = 20.0
    mask: Hypergaussian | ConstantMask = field(default_factory=Hypergaussian)
    shape: Sigmoid = field(default_factory=Sigmoid)

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ConfigError("omega0 must be positive")

    @property
    def final_angle(self):
        return math.pi / 2

    def _envelopes(self, t):
        rms = self.omega0 * self.mask.value(t)
        phase = self.final_angle * self.shape.value(t)
        return rms * np.sin(phase), rms * np.cos(phase)

    def _derivatives(self, t):
        F, dF = self.mask.value(t), self.mask.rate(t)
        phase = self.final_angle * self.shape.value(t)
        dphase = self.final_angle * self.shape.rate(t)
        s, c = np.sin(phase), np.cos(phase)
        return (self.omega0 * (dF * s + F * c * dphase),
                self.omega0 * (dF * c - F * s * dphase))

    def _angle(self, t):
        return self.final_angle * self.shape.value(t)

    def _angle_rate(self, t):
        return self.final_angle * self.shape.rate(t)


@dataclass(frozen=True)
class FractionalDdp(DdpOptimized):
    """DDP-shaped pulses ending with Omega_p/Omega_s = tan(alpha)."""

    alpha: float = math.pi / 4

    def __post_init__(self):
        super().__post_init__()
        if not 0 <= self.alpha <= math.pi / 2:
            raise ConfigError("alpha must lie in [0, pi/2]")

    @property
    def final_angle(self):
        return self.alpha


@dataclass(frozen=True)
class Gaussian(PulseFamily):
    """Delayed Gaussian pair, Stokes first: exp(-(t -+ tau/2)^2 / T^2)."""

    omega0: float = 20.0
    tau: float = 1.2
    T: float = 1.0

    def __post_init__(self):
        if not self.omega0 > 0 or not self.T > 0:
            raise ConfigError("omega0 and T must be positive")

    def _g(self, t, sign):
        return np.exp(-((np.asarray(t) - sign * self.tau / 2) ** 2) / self.T**2)

    def _dg(self, t, sign):
        t = np.asarray(t)
        return -2 * (t - sign * self.tau / 2) / self.T**2 * self._g(t, sign)

    def _envelopes(self, t):
        return self.omega0 * self._g(t, +1), self.omega0 * self._g(t, -1)

    def _derivatives(self, t):
        return self.omega0 * self._dg(t, +1), self.omega0 * self._dg(t, -1)

    def _x(self, t):
        return 2 * self.tau * np.asarray(t) / self.T**2

    def _angle(self, t):
        # Omega_p / Omega_s = exp(2 tau t / T^2)
        with np.errstate(over="ignore"):
            return np.arctan(np.exp(self._x(t)))

    def _angle_rate(self, t):
        return self.tau / self.T**2 / np.cosh(self._x(t))


@dataclass(frozen=True)
class FractionalGaussian(Gaussian):
    """Gaussian f-STIRAP pair; the Stokes pulse has a trailing component."""

    alpha: float = math.pi / 4

    def __post_init__(self):
        super().__post_init__()
        if not 0 <= self.alpha <= math.pi / 2:
            raise ConfigError("alpha must lie in [0, pi/2]")

    @property
    def final_angle(self):
        return self.alpha

    def _envelopes(self, t):
        gp, gs = self._g(t, +1), self._g(t, -1)
        return (self.omega0 * gp * math.sin(self.alpha),
                self.omega0 * (gs + gp * math.cos(self.alpha)))

    def _derivatives(self, t):
        dp, ds = self._dg(t, +1), self._dg(t, -1)
        return (self.omega0 * dp * math.sin(self.alpha),
                self.omega0 * (ds + dp * math.cos(self.alpha)))

    def _angle(self, t):
        # Omega_p / Omega_s = sin a / (exp(-x) + cos a)
        with np.errstate(over="ignore"):
            return np.arctan2(math.sin(self.alpha),
                              np.exp(-self._x(t)) + math.cos(self.alpha))

    def _angle_rate(self, t):
        s, c = math.sin(self.alpha), math.cos(self.alpha)
        with np.errstate(over="ignore", invalid="ignore"):
            e = np.exp(-self._x(t))
            rate = s * (2 * self.tau / self.T**2) * e / ((e + c) ** 2 + s**2)
        return np.nan_to_num(rate, nan=0.0)


@dataclass(frozen=True)
class TwoStateConstantEps(PulseFamily):
    """Two-state pair Omega = eps0 sin(pi f), Delta = eps0 cos(pi f)."""

    eps0: float = 1.0
    shape: Sigmoid = field(default_factory=Sigmoid)
    two_state = True

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ConfigError("eps0 must be positive")

    @property
    def omega0(self):
        return self.eps0

    def _envelopes(self, t):
        phase = math.pi * self.shape.value(t)
        return self.eps0 * np.sin(phase), self.eps0 * np.cos(phase)

    def _derivatives(self, t):
        phase = math.pi * self.shape.value(t)
        dphase = math.pi * self.shape.rate(t)
        return (self.eps0 * np.cos(phase) * dphase,
                -self.eps0 * np.sin(phase) * dphase)

    def _angle(self, t):
        return 0.5 * math.pi * self.shape.value(t)

    def _angle_rate(self, t):
        return 0.5 * math.pi * self.shape.rate(t)


@dataclass(frozen=True)
class LandauZener(PulseFamily):
    """Constant coupling Omega0 with a linear detuning sweep Delta = rate * t."""

    omega0: float = 1.0
    rate: float = 1.0
    two_state = True

    def __post_init__(self):
        if not self.omega0 > 0 or not self.rate > 0:
            raise ConfigError("omega0 and sweep rate must be positive")

    def _envelopes(self, t):
        t = np.asarray(t)
        return np.full_like(t, self.omega0, dtype=np.result_type(t, float)), self.rate * t

    def _derivatives(self, t):
        t = np.asarray(t)
        dt = np.result_type(t, float)
        return np.zeros_like(t, dtype=dt), np.full_like(t, self.rate, dtype=dt)

    def _angle(self, t):
        return 0.5 * np.arctan2(self.omega0, self.rate * np.asarray(t))

    def _angle_rate(self, t):
        t = np.asarray(t)
        return -0.5 * self.omega0 * self.rate / (self.omega0**2 + (self.rate * t) ** 2)


THREE_STATE_FAMILIES = (DdpOptimized, FractionalDdp, Gaussian, FractionalGaussian)


# ---------------------------------------------------------------------------
# operations


def _check_poles(desc, t, exclusion):
    if _is_real(t):
        return
    d = desc.pole_distance(t)
    if np.any(d < exclusion):
        raise PoleProximity(
            f"t={np.ravel(t)[np.argmin(np.ravel(d))]} lies within {exclusion} "
            "of a shape-function pole")


def evaluate(desc, t, exclusion: float = POLE_EXCLUSION):
    """Return ``(omega_p, omega_s)`` at real or complex time ``t``.

    For the two-state families this is ``(omega, delta)``.  Raises
    :class:`PoleProximity` when a complex ``t`` is closer than ``exclusion * T``
    to a pole of the shape function.
    """
    _check_poles(desc, t, exclusion * _time_unit(desc))
    return desc._envelopes(t)


def derivatives(desc, t, exclusion: float = POLE_EXCLUSION):
    """Closed-form time derivatives of both envelopes."""
    _check_poles(desc, t, exclusion * _time_unit(desc))
    return desc._derivatives(t)


def _time_unit(desc) -> float:
    if desc.shape is not None:
        return desc.shape.T
    return getattr(desc, "T", 1.0)


def mixing_angle(desc, t):
    """Mixing angle theta(t) = atan(Omega_p/Omega_s) on the real axis.

    Each family supplies the angle in closed form, which is the continuous
    extension through points where both envelopes underflow.  For the
    two-state families this is the two-state angle (1/2) atan(Omega/Delta).
    """
    theta = desc._angle(np.asarray(t, dtype=float))
    if np.any(~np.isfinite(theta)):
        raise DegenerateAngle(f"mixing angle undefined at t={t}")
    return theta


def mixing_angle_rate(desc, t):
    """d(theta)/dt from the closed-form family derivative."""
    return desc._angle_rate(np.asarray(t, dtype=float))


def angle_from_envelopes(omega_p, omega_s, peak: float, floor: float = ENVELOPE_FLOOR):
    """Generic atan2 mixing angle with an envelope floor.

    Used for sampled envelopes that have no closed-form angle.
    """
    omega_p, omega_s = np.asarray(omega_p), np.asarray(omega_s)
    if np.any((np.abs(omega_p) < floor * peak) & (np.abs(omega_s) < floor * peak)):
        raise DegenerateAngle("both envelopes below the floor")
    return np.arctan2(omega_p, omega_s)


class Areas(NamedTuple):
    pump: float
    stokes: float
    rms: float
    overlap: float
    ratio: float
    #: integral of sqrt(Omega_p^2 + Omega_s^2), the area under the rms envelope
    rms_envelope: float


def check_window(desc, window, floor: float = EDGE_FLOOR):
    """Raise :class:`WindowTooNarrow` if either envelope is non-negligible at an edge."""
    lo, hi = window
    for edge in (lo, hi):
        p, s = desc._envelopes(np.float64(edge))
        if max(abs(p), abs(s)) > floor * desc.peak:
            raise WindowTooNarrow(
                f"envelope {max(abs(p), abs(s)):.3e} at t={edge} exceeds "
                f"{floor:.1e} * peak; widen the window")


def areas(desc, window=(-10.0, 10.0), check_edges: bool = True) -> Areas:
    """Pulse areas over ``window``: pump, Stokes, rms, overlap and their ratio.

    The overlap area is the integral of min(Omega_p, Omega_s).
    """
    if check_edges:
        check_window(desc, window)
    lo, hi = window
    points = []
    crossing = _crossing(desc, window)
    if crossing is not None:
        points.append(crossing)

    def quad(fn):
        return integrate.quad(fn, lo, hi, points=points or None, limit=400,
                              epsabs=0, epsrel=1e-11)[0]

    a_p = quad(lambda t: desc._envelopes(t)[0])
    a_s = quad(lambda t: desc._envelopes(t)[1])
    a_o = quad(lambda t: min(desc._envelopes(t)))
    env = quad(lambda t: math.hypot(*desc._envelopes(t)))
    rms = math.hypot(a_p, a_s)
    return Areas(a_p, a_s, rms, a_o, rms / a_o if a_o > 0 else math.inf, env)


def _crossing(desc, window):
    g = lambda t: float(desc._angle(t)) - math.pi / 4
    lo, hi = window
    if g(lo) * g(hi) < 0:
        return optimize.brentq(g, lo, hi, xtol=1e-14)
    return None


class Margin(NamedTuple):
    value: float
    at: float


def adiabaticity_margin(desc, window=(-3.0, 3.0), num_samples: int = 2001) -> Margin:
    """Smallest local adiabaticity reserve Omega0|F(t)| - |dtheta/dt| over ``window``.

    A negative value is a legitimate result: adiabaticity is violated there.
    """
    if not isinstance(desc, DdpOptimized):
        raise ConfigError("adiabaticity_margin applies to DDP-optimized families")
    t = np.linspace(window[0], window[1], num_samples)
    reserve = desc.omega0 * np.abs(desc.mask.value(t)) - np.abs(desc._angle_rate(t))
    i = int(np.argmin(reserve))
    return Margin(float(reserve[i]), float(t[i]))


def sample(desc, times):
    """Real-axis envelope samples as an ``(n, 3)`` array of t, omega_p, omega_s."""
    times = np.asarray(times, dtype=float)
    p, s = desc._envelopes(times)
    return np.column_stack([times, p, s])


# ---------------------------------------------------------------------------
# structured configuration

FAMILY_NAMES = {
    "ddp-optimized": DdpOptimized,
    "fractional-ddp": FractionalDdp,
    "gaussian": Gaussian,
    "fractional-gaussian": FractionalGaussian,
    "two-state-constant-eps": TwoStateConstantEps,
    "landau-zener": LandauZener,
}
PULSE_KEYS = {"family", "omega0", "eps0", "tau", "T", "n", "lambda", "t0", "alpha", "rate"}

_ALLOWED = {
    DdpOptimized: {"omega0", "n", "lambda", "t0", "T"},
    FractionalDdp: {"omega0", "n", "lambda", "t0", "T", "alpha"},
    Gaussian: {"omega0", "tau", "T"},
    FractionalGaussian: {"omega0", "tau", "T", "alpha"},
    TwoStateConstantEps: {"eps0", "lambda", "T"},
    LandauZener: {"omega0", "rate"},
}


def from_config(record: dict):
    """Build a descriptor from a key-value record.

    Keys: ``family`` plus the subset of omega0, eps0, tau, T, n, lambda, t0,
    alpha, rate relevant to the family.  A DDP family without ``t0`` gets a
    constant mask.
    """
    record = dict(record)
    name = record.pop("family", None)
    if name not in FAMILY_NAMES:
        raise ConfigError(f"unknown pulse family {name!r}; expected one of {sorted(FAMILY_NAMES)}")
    cls = FAMILY_NAMES[name]
    extra = set(record) - _ALLOWED[cls]
    if extra:
        raise ConfigError(f"key(s) {sorted(extra)} not valid for family {name!r}")
    try:
        vals = {k: float(v) if k != "n" else v for k, v in record.items() if v is not None}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-numeric pulse parameter: {exc}") from None
    T = vals.get("T", 1.0)
    if cls in (DdpOptimized, FractionalDdp):
        shape = Sigmoid(vals.get("lambda", 4.0), T)
        if "t0" in vals:
            n = vals.get("n", 3)
            if isinstance(n, str) or int(n) != n:
                raise ConfigError("n must be a positive integer")
            mask = Hypergaussian(int(n), vals["t0"])
        else:
            mask = ConstantMask()
        kw = dict(omega0=vals.get("omega0", 20.0), mask=mask, shape=shape)
        if cls is FractionalDdp:
            kw["alpha"] = vals.get("alpha", math.pi / 4)
        return cls(**kw)
    if cls in (Gaussian, FractionalGaussian):
        kw = dict(omega0=vals.get("omega0", 20.0), tau=vals.get("tau", 1.2), T=T)
        if cls is FractionalGaussian:
            kw["alpha"] = vals.get("alpha", math.pi / 4)
        return cls(**kw)
    if cls is TwoStateConstantEps:
        return cls(vals.get("eps0", 1.0), Sigmoid(vals.get("lambda", 4.0), T))
    return cls(vals.get("omega0", 1.0), vals.get("rate", 1.0))


def to_config(desc) -> dict:
    """Inverse of :func:`from_config`."""
    name = next(k for k, v in FAMILY_NAMES.items() if type(desc) is v)
    out = {"family": name}
    if isinstance(desc, DdpOptimized):
        out.update(omega0=desc.omega0, **{"lambda": desc.shape.steepness}, T=desc.shape.T)
        if isinstance(desc.mask, Hypergaussian):
            out.update(n=desc.mask.order, t0=desc.mask.width)
    elif isinstance(desc, Gaussian):
        out.update(omega0=desc.omega0, tau=desc.tau, T=desc.T)
    elif isinstance(desc, TwoStateConstantEps):
        out.update(eps0=desc.eps0, **{"lambda": desc.shape.steepness}, T=desc.shape.T)
    else:
        out.update(omega0=desc.omega0, rate=desc.rate)
    if hasattr(desc, "alpha"):
        out["alpha"] = desc.alpha
    return out
