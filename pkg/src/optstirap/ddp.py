"""Dykhne-Davis-Pechukas analysis of two-state models.

A two-state model is a pair Omega(t), Delta(t) continued to complex time.  The
quasienergy splitting eps = sqrt(Omega^2 + Delta^2) vanishes at complex
transition points t_k; with D(t_k) = int_0^{t_k} eps dt the nonadiabatic
probability is estimated as

    P ~ exp(-2 Im D(t_0))                      (dominant point)
    P ~ |sum_k Gamma_k exp(i D(t_k))|^2        (all points in the box)

with Gamma_k = 4i Res_{t_k} theta'(t), theta' = (Omega' Delta - Omega Delta')
/ (2 (Omega^2 + Delta^2)).  Zeros are searched on eps^2, which has no branch
cuts; the D integral tracks the square-root branch along the contour.

The estimate is asymptotic: existence of Stokes lines and the remaining
validity conditions are not checked.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import csvio, pulses
from .errors import (BoxContainsPole, ContourBlocked, HigherOrderZero, NoConvergence,
                     PoleProximity, RealAxisZero)

log = logging.getLogger(__name__)

SINGLE = "SingleDominant"
MULTI = "MultiPoint"
NONE = "NoPointsFound"

RESIDUAL_TOL = 1e-10     # |eps^2(t0)| relative to the local cancellation scale
DEDUPE_TOL = 1e-8        # absolute, in units of T
CLEARANCE = 0.05         # contour distance to poles and other zeros, units of T
EDGE_LEVEL = 1e-8        # default box: eps >= EDGE_LEVEL * peak on its real range
CAVEAT = "asymptotic estimate; Stokes-line and validity conditions (ii)-(iv) unchecked"

# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (non-negative half)
_XK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                0.207784955007898467600689403773245, 0.0])
_WK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])           # ascending, 15 nodes
_WK15 = np.concatenate([_WK[:-1], _WK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[7] = _WG[3]
_WG15[[9, 11, 13]] = _WG[2::-1]


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class TwoStateModel:
    """Coupling and detuning as functions of complex time, plus known poles."""

    omega: Callable
    delta: Callable
    domega: Callable
    ddelta: Callable
    pole_distance: Callable = lambda t: np.full(np.shape(t), np.inf)
    poles_between: Callable = lambda lo, hi: []
    T: float = 1.0
    peak: float = 1.0
    window: tuple[float, float] = (-10.0, 10.0)
    label: str = "model"

    @classmethod
    def from_descriptor(cls, desc, window=(-10.0, 10.0)) -> "TwoStateModel":
        """Model of a two-state family (Omega, Delta) = envelopes."""
        if not desc.two_state:
            raise ValueError("three-state descriptors need a reduction first; "
                             "use TwoStateModel.from_effective")

        def omega(t):
            return desc._envelopes(t)[0]

        def delta(t):
            return desc._envelopes(t)[1]

        def domega(t):
            return desc._derivatives(t)[0]

        def ddelta(t):
            return desc._derivatives(t)[1]

        return cls(omega, delta, domega, ddelta, desc.pole_distance, desc.poles_between,
                   pulses._time_unit(desc), float(desc.peak), tuple(window),
                   type(desc).__name__)

    @classmethod
    def from_effective(cls, eff, window=(-10.0, 10.0)) -> "TwoStateModel":
        """Model of an effective two-state system from :mod:`optstirap.reduction`."""
        desc = eff.desc
        peak = float(desc.peak)
        if eff.regime != "resonant":
            peak = peak * peak / (2 * abs(eff.delta))
        return cls(eff.omega_eff, eff.delta_eff,
                   lambda t: eff.derivatives(t)[0], lambda t: eff.derivatives(t)[1],
                   desc.pole_distance, desc.poles_between, pulses._time_unit(desc), peak,
                   tuple(window), f"{type(desc).__name__}/{eff.regime}")

    def eps2(self, t):
        return self.omega(t) ** 2 + self.delta(t) ** 2

    def deps2(self, t):
        return 2 * (self.omega(t) * self.domega(t) + self.delta(t) * self.ddelta(t))

    def theta_rate(self, t):
        om, de = self.omega(t), self.delta(t)
        return 0.5 * (self.domega(t) * de - om * self.ddelta(t)) / (om * om + de * de)

    def scale2(self, t):
        """Cancellation scale of eps^2: max(|Omega|^2, |Delta|^2)."""
        return np.maximum(np.abs(self.omega(t)) ** 2, np.abs(self.delta(t)) ** 2)


def as_model(obj, window=None) -> TwoStateModel:
    """Accept a TwoStateModel, a two-state descriptor or an EffectiveTwoState."""
    if isinstance(obj, TwoStateModel):
        return obj
    kw = {} if window is None else {"window": window}
    if hasattr(obj, "regime"):
        return TwoStateModel.from_effective(obj, **kw)
    return TwoStateModel.from_descriptor(obj, **kw)


def _check_pole(model, t, exclusion=pulses.POLE_EXCLUSION):
    if np.iscomplexobj(t) and np.any(model.pole_distance(t) < exclusion * model.T):
        raise PoleProximity(f"t={t} lies within {exclusion * model.T:g} of a pole")


def quasienergy(model, t, previous=None):
    """eps(t) = sqrt(Omega^2 + Delta^2).

    Without ``previous`` the principal root is returned, which is positive on
    the real axis and satisfies eps(conj t) = conj(eps(t)).  With ``previous``
    (the value at the preceding point of a path) the sign closest to it is
    chosen, so path-ordered calls track one branch.
    """
    model = as_model(model)
    t = np.asarray(t)
    _check_pole(model, t)
    eps = np.sqrt(np.asarray(model.eps2(t), dtype=complex))
    if previous is not None:
        eps = np.where((eps * np.conj(previous)).real < 0, -eps, eps)
    return eps if eps.ndim else complex(eps)


# ---------------------------------------------------------------------------
# transition points


@dataclass
class TransitionPoint:
    t0: complex
    newton_residual: float
    multiplicity: int = 1
    d_value: complex | None = None
    gamma_k: complex | None = None
    contour: str = ""

    @property
    def im_d(self) -> float:
        return float("nan") if self.d_value is None else self.d_value.imag


@dataclass(frozen=True)
class SearchBox:
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    def __post_init__(self):
        if not (self.re_lo < self.re_hi and 0 <= self.im_lo < self.im_hi):
            raise ValueError("search box must be a non-empty rectangle in the upper half-plane")

    def contains(self, z, pad=0.0) -> bool:
        return (self.re_lo - pad <= z.real <= self.re_hi + pad
                and self.im_lo - pad <= z.imag <= self.im_hi + pad and z.imag > 0)


def default_box(model) -> SearchBox:
    """Re t in the window part where eps >= EDGE_LEVEL * peak, Im t in (0, min(2T, 0.8 pole))."""
    model = as_model(model)
    lo, hi = model.window
    ts = np.linspace(lo, hi, 4001)
    eps = np.sqrt(np.abs(model.eps2(ts)))
    centre = np.argmin(np.abs(ts))
    ok = eps >= EDGE_LEVEL * model.peak
    left = right = centre
    while left > 0 and ok[left - 1]:
        left -= 1
    while right < ts.size - 1 and ok[right + 1]:
        right += 1
    half = min(-ts[left], ts[right])
    if half <= 0:
        raise RealAxisZero("quasienergy below the degeneracy floor at t = 0")
    height = 2 * model.T
    poles = model.poles_between(0.0, 10 * height)
    if poles:
        height = min(height, 0.8 * min(abs(p.imag) for p in poles))
    return SearchBox(-half, half, 0.0, height)


def find_transition_points(model, box: SearchBox | None = None, grid=(16, 16),
                           max_iter: int = 100) -> list[TransitionPoint]:
    """Distinct zeros of eps^2 in ``box`` by Newton iteration from a uniform seed grid.

    Seeds that do not converge are logged and dropped.  Results are sorted by
    imaginary part.
    """
    model = as_model(model)
    box = box or default_box(model)
    excl = pulses.POLE_EXCLUSION * model.T
    for p in model.poles_between(box.im_lo - excl, box.im_hi + excl):
        if box.re_lo - excl <= p.real <= box.re_hi + excl:
            raise BoxContainsPole(f"search box contains the pole at t={p}")
    nx, ny = grid
    xs = box.re_lo + (np.arange(nx) + 0.5) * (box.re_hi - box.re_lo) / nx
    ys = box.im_lo + (np.arange(ny) + 0.5) * (box.im_hi - box.im_lo) / ny
    seeds = (xs[None, :] + 1j * ys[:, None]).ravel()
    # Newton on eps^2 and on eps^2 / (Omega Delta): same zeros, different basins
    z = np.concatenate([_newton(model, seeds, False, max_iter),
                        _newton(model, seeds, True, max_iter)])
    with np.errstate(all="ignore"):
        resid = np.abs(model.eps2(z))
        scale = model.scale2(z)
    points: list[TransitionPoint] = []
    failed = 0
    for zk, r, s in zip(z, resid, scale):
        if not (np.isfinite(zk) and np.isfinite(r) and r <= RESIDUAL_TOL * s):
            failed += 1
            continue
        if not box.contains(zk, pad=1e-9 * model.T) or zk.imag <= 1e-12 * model.T:
            continue
        if model.pole_distance(np.asarray(zk)) < excl:
            continue
        mult = _multiplicity(model, zk)
        if mult > 1:
            zk = _polish(model, zk, mult)
            r = float(np.abs(model.eps2(zk)))
        # a zero of multiplicity m is only located to ~ eps_machine^(1/m)
        if any(abs(zk - p.t0) < DEDUPE_TOL ** (1 / max(mult, p.multiplicity)) * model.T
               for p in points):
            continue
        points.append(TransitionPoint(complex(zk), float(r), mult))
    if failed:
        log.debug("%d of %d Newton seeds did not converge (%s)", failed, z.size,
                  NoConvergence.__name__)
    points.sort(key=lambda p: (p.t0.imag, p.t0.real))
    return points


def _newton(model, z, ratio, max_iter):
    z = z.copy()
    active = np.ones(z.size, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            if not active.any():
                break
            za = z[active]
            if ratio:
                om, de = model.omega(za), model.delta(za)
                logd = (model.deps2(za) / model.eps2(za) - model.domega(za) / om
                        - model.ddelta(za) / de)
                step = 1 / logd
            else:
                step = model.eps2(za) / model.deps2(za)
            bad = ~np.isfinite(step)
            step[bad] = 0.0
            z[active] = za - step
            done = bad | (np.abs(step) <= 1e-14 * (1 + np.abs(za))) | ~np.isfinite(z[active])
            active[np.flatnonzero(active)[done]] = False
    return z


def _polish(model, z, mult, iters: int = 8):
    """Modified Newton z -= m eps^2 / (eps^2)' for a zero of multiplicity m."""
    with np.errstate(all="ignore"):
        for _ in range(iters):
            d = model.deps2(z)
            if d == 0:
                break
            step = mult * model.eps2(z) / d
            if not np.isfinite(step):
                break
            z = z - step
            if abs(step) <= 1e-15 * (1 + abs(z)):
                break
    return complex(z)


def _multiplicity(model, z) -> int:
    with np.errstate(all="ignore"):
        d = abs(model.deps2(z)) * model.T
        s = float(model.scale2(z))
    return 1 if d > 1e-5 * s else 2


# ---------------------------------------------------------------------------
# D integral


def _segment_distance(a, b, p) -> float:
    ab = b - a
    if ab == 0:
        return abs(p - a)
    u = ((p - a) * np.conj(ab)).real / abs(ab) ** 2
    return abs(p - (a + min(max(u, 0.0), 1.0) * ab))


def _obstacles(model, t0, others):
    hi = max(abs(t0.imag), 0.0) + CLEARANCE * model.T
    obs = list(model.poles_between(-hi, hi))
    obs += [z for z in (others or ()) if abs(z - t0) > 1e-4 * model.T]
    return obs


def _blocked(path, obstacles, clearance) -> bool:
    return any(_segment_distance(a, b, p) < clearance
               for a, b in zip(path[:-1], path[1:]) for p in obstacles)


def candidate_contours(model, t0, others=()):
    """Yield (name, waypoints) in preference order, skipping blocked ones."""
    model = as_model(model)
    t0 = complex(t0)
    obs = _obstacles(model, t0, others)
    clear = CLEARANCE * model.T
    cands = [("straight", [0j, t0]), ("axis-vertical", [0j, complex(t0.real), t0])]
    for k in range(1, 9):
        for sgn in (1, -1):
            x = t0.real + sgn * k * 0.25 * model.T
            cands.append((f"detour{'+' if sgn > 0 else '-'}{k}",
                          [0j, complex(x), complex(x, t0.imag), t0]))
    for name, path in cands:
        if not _blocked(path, obs, clear):
            yield name, path


def _integrate_path(model, path, rtol, depth_limit=60):
    """Integrate eps along a polyline, tracking the branch from eps(path[0]) > 0."""
    start = complex(path[0])
    eps_prev = complex(np.sqrt(complex(model.eps2(start))))
    if abs(eps_prev) <= 1e-14 * model.peak:
        raise RealAxisZero(f"quasienergy vanishes at the contour start {start}")
    if abs(eps_prev.imag) > 1e-12 * abs(eps_prev) or eps_prev.real < 0:
        raise ValueError("contour must start on the real axis where eps > 0")
    total = 0j
    tol = rtol * model.peak * max(sum(abs(b - a) for a, b in zip(path[:-1], path[1:])), model.T)
    nseg = len(path) - 1
    for k, (a, b) in enumerate(zip(path[:-1], path[1:])):
        last = k == nseg - 1
        if last:
            # t = b + (a - b)(1 - u)^2 removes the sqrt endpoint singularity at b
            def tmap(u, a=a, b=b):
                return b + (a - b) * (1 - u) ** 2

            def jac(u, a=a, b=b):
                return 2 * (b - a) * (1 - u)
        else:
            def tmap(u, a=a, b=b):
                return a + (b - a) * u

            def jac(u, a=a, b=b):
                return (b - a) * np.ones_like(u)
        seg, eps_prev = _adaptive(model, tmap, jac, eps_prev, tol, rtol, last, depth_limit)
        total += seg
    return total


def _adaptive(model, tmap, jac, eps_start, tol, rtol, ends_at_zero, depth_limit):
    total = 0j
    stack = [(0.0, 1.0, 0)]
    eps_left = eps_start
    floor = 1e-6 * model.peak
    while stack:
        ua, ub, depth = stack.pop()
        half = 0.5 * (ub - ua)
        u = ua + half * (_NODES + 1)
        at_end = ends_at_zero and ub == 1.0
        ue = u if at_end else np.append(u, ub)
        ts = tmap(ue)
        _check_pole(model, ts.astype(complex))
        e2 = np.asarray(model.eps2(ts), dtype=complex)
        raw = np.sqrt(e2)
        with np.errstate(all="ignore"):
            # relative roundoff of eps from cancellation inside Omega^2 + Delta^2
            noise = 1e-15 * np.nanmax(model.scale2(ts[:15]) / np.abs(e2[:15]))
        tracked = np.empty_like(raw)
        prev = eps_left
        smooth = True
        for i, e in enumerate(raw):
            if (e * np.conj(prev)).real < 0:
                e = -e
            # phases of values this close to a zero are roundoff, not signal
            if (min(abs(e), abs(prev)) > floor
                    and abs(np.angle(e / prev)) > math.pi / 4):
                smooth = False
            tracked[i] = e
            prev = e
        f = tracked[:15] * jac(u)
        k15 = half * np.dot(_WK15, f)
        g7 = half * np.dot(_WG15, f)
        err = abs(k15 - g7)
        mag = half * np.dot(_WK15, np.abs(f))
        ok = err <= max(tol * (ub - ua), max(rtol, noise) * mag) or half < 1e-14
        if smooth and ok or depth >= depth_limit:
            if not (smooth and ok):
                raise ContourBlocked("D integral failed to converge along the contour")
            total += k15
            eps_left = 0j if at_end else tracked[-1]
            continue
        mid = 0.5 * (ua + ub)
        stack.append((mid, ub, depth + 1))
        stack.append((ua, mid, depth + 1))
    return total, eps_left


def d_integral(model, t0, contour="auto", others=(), rtol: float = 1e-13):
    """D(t0) = int_0^{t0} eps(t) dt with eps > 0 at t = 0.

    ``contour`` is "auto" (first unblocked of straight, axis-then-vertical,
    detours), one of those names, or an explicit list of waypoints from 0 to
    t0.  ``others`` lists further zeros to keep clear of.  Returns
    ``(D, contour_name)``.
    """
    model = as_model(model)
    t0 = complex(t0)
    if isinstance(contour, str):
        options = list(candidate_contours(model, t0, others))
        if contour != "auto":
            options = [o for o in options if o[0] == contour]
        if not options:
            raise ContourBlocked(f"no clear contour from 0 to {t0} ({contour})")
        name, path = options[0]
    else:
        path = [complex(p) for p in contour]
        if abs(path[0]) != 0 or abs(path[-1] - t0) > 1e-14 * max(1, abs(t0)):
            raise ValueError("explicit contour must run from 0 to t0")
        name = "custom"
    return _integrate_path(model, path, rtol), name


# ---------------------------------------------------------------------------
# residue factor


def residue_factor(model, t0, others=(), radius: float | None = None, nodes: int = 256,
                   multiplicity: int = 1) -> complex:
    """Gamma = 4i Res theta'(t0) = (2/pi) * (circle integral of theta').

    The radius defaults to a quarter of the distance to the nearest other zero,
    pole or the real axis (capped at T/4).
    """
    model = as_model(model)
    if multiplicity > 1:
        raise HigherOrderZero(f"zero at {t0} has multiplicity {multiplicity}")
    t0 = complex(t0)
    if radius is None:
        dist = [model.T, abs(t0.imag)]
        dist += [abs(z - t0) for z in others if abs(z - t0) > 1e-4 * model.T]
        dist.append(float(model.pole_distance(np.asarray(t0))))
        radius = 0.25 * min(dist)
    phi = 2 * math.pi * np.arange(nodes) / nodes
    w = radius * np.exp(1j * phi)
    ts = t0 + w
    _check_pole(model, ts)
    with np.errstate(all="ignore"):
        vals = model.theta_rate(ts)
    if not np.all(np.isfinite(vals)):
        raise HigherOrderZero(f"theta' not finite on the residue circle around {t0}")
    integral = np.sum(vals * 1j * w) * (2 * math.pi / nodes)
    return complex(2 / math.pi * integral)


# ---------------------------------------------------------------------------
# estimate


@dataclass
class DdpEstimate:
    probability: float
    points: list[TransitionPoint]
    mode: str
    single_probability: float
    multi_probability: float | None
    box: SearchBox
    grid: tuple[int, int]
    clamped: bool = False
    notes: list[str] = field(default_factory=list)

    def summary(self) -> str:
        b = self.box
        lines = [f"search box: Re [{b.re_lo:.6g}, {b.re_hi:.6g}], Im [{b.im_lo:.6g}, "
                 f"{b.im_hi:.6g}], grid {self.grid[0]}x{self.grid[1]}",
                 f"mode: {self.mode}"]
        if self.mode == NONE:
            lines.append("no transition points in box: probability 0 (box-relative)")
        for k, p in enumerate(self.points):
            g = "n/a" if p.gamma_k is None else f"{p.gamma_k.real:+.6g}{p.gamma_k.imag:+.6g}i"
            lines.append(f"  t{k} = {p.t0.real:+.10g}{p.t0.imag:+.10g}i  Im D = {p.im_d:.10g}  "
                         f"Gamma = {g}  contour = {p.contour}")
        lines.append(f"single-dominant P = {self.single_probability:.10g}")
        if self.multi_probability is not None:
            lines.append(f"multi-point P = {self.multi_probability:.10g}")
        if self.clamped:
            lines.append("probability clamped to [0, 1]")
        lines += self.notes
        return "\n".join(lines)

    def write_csv(self, path):
        b = self.box
        comments = [f"box: {b.re_lo!r} {b.re_hi!r} {b.im_lo!r} {b.im_hi!r}",
                    f"grid: {self.grid[0]} {self.grid[1]}", f"mode: {self.mode}",
                    f"single_probability: {self.single_probability!r}",
                    f"multi_probability: {self.multi_probability!r}",
                    f"clamped: {int(self.clamped)}", CAVEAT]
        header = ["re_t0", "im_t0", "re_D", "im_D", "re_gamma", "im_gamma", "multiplicity",
                  "newton_residual"]
        rows = []
        for p in self.points:
            d = p.d_value if p.d_value is not None else complex("nan")
            g = p.gamma_k if p.gamma_k is not None else complex("nan")
            rows.append([p.t0.real, p.t0.imag, d.real, d.imag, g.real, g.imag,
                         p.multiplicity, p.newton_residual])
        return csvio.write_csv(path, header, rows, comments)


def _clamp(p):
    c = min(max(p, 0.0), 1.0)
    return c, c != p


def check_real_axis(model, lo, hi, samples: int = 4001, floor: float = 1e-10):
    """Raise RealAxisZero when eps drops below ``floor * peak`` on [lo, hi]."""
    ts = np.linspace(lo, hi, samples)
    eps = np.sqrt(np.abs(model.eps2(ts)))
    if np.min(eps) <= floor * model.peak:
        k = int(np.argmin(eps))
        raise RealAxisZero(f"quasienergy (nearly) vanishes on the real axis at t={ts[k]:.6g}")


def estimate(model, box: SearchBox | None = None, grid=(16, 16)) -> DdpEstimate:
    """DDP transition probability for a two-state model (see module docstring)."""
    model = as_model(model)
    box = box or default_box(model)
    check_real_axis(model, box.re_lo, box.re_hi)
    points = find_transition_points(model, box, grid)
    notes = [CAVEAT]
    if not points:
        return DdpEstimate(0.0, [], NONE, 0.0, None, box, tuple(grid), notes=notes)
    zeros = [p.t0 for p in points]
    for p in points:
        p.d_value, p.contour = d_integral(model, p.t0, others=zeros)
    higher = False
    for p in points:
        try:
            p.gamma_k = residue_factor(model, p.t0, others=zeros, multiplicity=p.multiplicity)
        except HigherOrderZero as exc:
            higher = True
            notes.append(f"higher-order zero: {exc}")
    dominant = min(points, key=lambda p: p.d_value.imag)
    single, c1 = _clamp(math.exp(-2 * dominant.d_value.imag))
    multi, c2 = None, False
    if len(points) > 1 and not higher:
        amp = sum(p.gamma_k * np.exp(1j * p.d_value) for p in points)
        multi, c2 = _clamp(float(abs(amp) ** 2))
    if higher:
        warnings.warn("higher-order transition point: falling back to the dominant-point "
                      "estimate", stacklevel=2)
    clamped = c1 or c2
    if clamped:
        log.warning("DDP probability clamped to [0, 1]")
    mode = MULTI if multi is not None else SINGLE
    prob = multi if mode == MULTI else single
    return DdpEstimate(prob, points, mode, single, multi, box, tuple(grid), clamped, notes)
