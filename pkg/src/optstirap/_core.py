"""Compiled Dormand-Prince 5(4) integrator with per-family right-hand sides.

The scipy steppers spend most of their time in per-step Python overhead, which
dominates the long Landau-Zener windows and the sweeps.  Here the envelopes are
re-expressed as numba functions selected by an integer family code; the
Python-level descriptors in :mod:`optstirap.pulses` remain the reference and
the tests check both agree.

Error control treats real and imaginary parts as separate components.
"""
import math

import numpy as np
from numba import njit

# family codes
DDP, GAUSS, FGAUSS, CONST_EPS, LZ = 0, 1, 2, 3, 4
# system kinds
THREE_STATE, TWO_STATE, MAPPED_FRAME, ELIMINATED, RESONANT_BARE = 0, 1, 2, 3, 4

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                                22 / 525, -1 / 40)
# quartic dense output (Shampine), rows = stages 1..7, columns = x^1..x^4
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


@njit(cache=True)
def _expit(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def envelopes(code, p, t):
    """(a, b, dtheta/dt) for a family; a, b = (Omega_p, Omega_s) or (Omega, Delta)."""
    if code == DDP:
        # p = omega0, final_angle, lambda, T, mask_kind, n, T0
        k = p[2] / p[3]
        f = _expit(k * t)
        g = _expit(-k * t)
        F = 1.0
        if p[4] > 0.5:
            F = math.exp(-((t / p[6]) ** (2 * int(p[5]))))
        ph = p[1] * f
        return p[0] * F * math.sin(ph), p[0] * F * math.cos(ph), p[1] * k * f * g
    if code == GAUSS or code == FGAUSS:
        # p = omega0, tau, T, alpha
        T2 = p[2] * p[2]
        gp = math.exp(-((t - 0.5 * p[1]) ** 2) / T2)
        gs = math.exp(-((t + 0.5 * p[1]) ** 2) / T2)
        x = 2.0 * p[1] * t / T2
        if code == GAUSS:
            return p[0] * gp, p[0] * gs, p[1] / T2 / math.cosh(x)
        s = math.sin(p[3])
        c = math.cos(p[3])
        rate = 0.0
        if x > -700.0:
            e = math.exp(-x)
            rate = s * (2.0 * p[1] / T2) * e / ((e + c) ** 2 + s * s)
        return p[0] * gp * s, p[0] * (gs + gp * c), rate
    if code == CONST_EPS:
        # p = eps0, lambda, T
        k = p[1] / p[2]
        f = _expit(k * t)
        ph = math.pi * f
        return p[0] * math.sin(ph), p[0] * math.cos(ph), 0.5 * math.pi * k * f * _expit(-k * t)
    # LZ: p = omega0, rate
    d = p[1] * t
    return p[0], d, -0.5 * p[0] * p[1] / (p[0] * p[0] + d * d)


@njit(cache=True)
def rhs(kind, code, p, sp, t, y, out):
    """out = -i H(t) y.  sp = (delta, delta2, gamma) for three-state systems."""
    a, b, rate = envelopes(code, p, t)
    if kind == THREE_STATE:
        h22 = sp[0] - 0.5j * sp[2]
        out[0] = -1j * (0.5 * a * y[1])
        out[1] = -1j * (0.5 * a * y[0] + h22 * y[1] + 0.5 * b * y[2])
        out[2] = -1j * (0.5 * b * y[1] + sp[1] * y[2])
    elif kind == TWO_STATE:
        out[0] = -1j * (0.5 * a * y[1])
        out[1] = -1j * (0.5 * a * y[0] + b * y[1])
    elif kind == MAPPED_FRAME:
        # 1/2 [[-R/2, -i rate], [i rate, R/2]]
        r = 0.5 * math.sqrt(a * a + b * b)
        out[0] = -1j * 0.5 * (-r * y[0] - 1j * rate * y[1])
        out[1] = -1j * 0.5 * (1j * rate * y[0] + r * y[1])
    elif kind == ELIMINATED:
        om = -a * b / (2.0 * sp[0])
        de = (a * a - b * b) / (4.0 * sp[0])
        out[0] = -1j * 0.5 * (-de * y[0] + om * y[1])
        out[1] = -1j * 0.5 * (om * y[0] + de * y[1])
    else:
        # RESONANT_BARE: 1/2 [[Os, Op], [Op, -Os]]
        out[0] = -1j * 0.5 * (b * y[0] + a * y[1])
        out[1] = -1j * 0.5 * (a * y[0] - b * y[1])


@njit(cache=True)
def _err_norm(y, ynew, e, rtol, atol):
    s = 0.0
    n = y.shape[0]
    for i in range(n):
        sr = atol + rtol * max(abs(y[i].real), abs(ynew[i].real))
        si = atol + rtol * max(abs(y[i].imag), abs(ynew[i].imag))
        s += (e[i].real / sr) ** 2 + (e[i].imag / si) ** 2
    return math.sqrt(s / (2 * n))


@njit(cache=True)
def dopri54(kind, code, p, sp, t0, t1, y0, rtol, atol, max_step, h0, grid, max_steps):
    """Integrate from t0 to t1; sample the dense output at ``grid`` (monotone, inside span).

    Returns (y_final, samples, accepted, rejected, status); status 0 = ok,
    -1 = step size underflow, -2 = too many steps.
    """
    n = y0.shape[0]
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    y = y0.copy()
    K = np.empty((7, n), dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    ynew = np.empty(n, dtype=np.complex128)
    err = np.empty(n, dtype=np.complex128)
    samples = np.empty((grid.shape[0], n), dtype=np.complex128)
    t = t0
    rhs(kind, code, p, sp, t, y, K[0])
    # initial step (Hairer & Wanner heuristic)
    if h0 > 0:
        h = h0
    else:
        d0 = 0.0
        d1 = 0.0
        for i in range(n):
            sc = atol + rtol * abs(y[i])
            d0 += (abs(y[i]) / sc) ** 2
            d1 += (abs(K[0][i]) / sc) ** 2
        d0 = math.sqrt(d0 / n)
        d1 = math.sqrt(d1 / n)
        if d0 < 1e-5 or d1 < 1e-5:
            h = 1e-6
        else:
            h = 0.01 * d0 / d1
        h = min(h, span)
        for i in range(n):
            tmp[i] = y[i] + direction * h * K[0][i]
        rhs(kind, code, p, sp, t + direction * h, tmp, err)
        d2 = 0.0
        for i in range(n):
            d2 += (abs(err[i] - K[0][i]) / (atol + rtol * abs(y[i]))) ** 2
        d2 = math.sqrt(d2 / n) / h
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** 0.2
        h = min(100 * h, h1, span)
    h = min(h, max_step)
    accepted = 0
    rejected = 0
    k = 0
    ng = grid.shape[0]
    status = 0
    while direction * (t1 - t) > 0:
        if accepted + rejected >= max_steps:
            status = -2
            break
        min_step = 10 * abs(np.nextafter(t, direction * np.inf) - t)
        if h < min_step:
            status = -1
            break
        if h > abs(t1 - t):
            h = abs(t1 - t)
        hs = direction * h
        for i in range(n):
            tmp[i] = y[i] + hs * (_A21 * K[0][i])
        rhs(kind, code, p, sp, t + _C2 * hs, tmp, K[1])
        for i in range(n):
            tmp[i] = y[i] + hs * (_A31 * K[0][i] + _A32 * K[1][i])
        rhs(kind, code, p, sp, t + _C3 * hs, tmp, K[2])
        for i in range(n):
            tmp[i] = y[i] + hs * (_A41 * K[0][i] + _A42 * K[1][i] + _A43 * K[2][i])
        rhs(kind, code, p, sp, t + _C4 * hs, tmp, K[3])
        for i in range(n):
            tmp[i] = y[i] + hs * (_A51 * K[0][i] + _A52 * K[1][i] + _A53 * K[2][i]
                                  + _A54 * K[3][i])
        rhs(kind, code, p, sp, t + _C5 * hs, tmp, K[4])
        for i in range(n):
            tmp[i] = y[i] + hs * (_A61 * K[0][i] + _A62 * K[1][i] + _A63 * K[2][i]
                                  + _A64 * K[3][i] + _A65 * K[4][i])
        rhs(kind, code, p, sp, t + hs, tmp, K[5])
        for i in range(n):
            ynew[i] = y[i] + hs * (_B1 * K[0][i] + _B3 * K[2][i] + _B4 * K[3][i]
                                   + _B5 * K[4][i] + _B6 * K[5][i])
        t_new = t + hs
        if direction * (t_new - t1) > 0 or abs(t1 - t_new) < 1e-14 * max(1.0, abs(t1)):
            t_new = t1
        rhs(kind, code, p, sp, t_new, ynew, K[6])
        for i in range(n):
            err[i] = hs * (_E1 * K[0][i] + _E3 * K[2][i] + _E4 * K[3][i] + _E5 * K[4][i]
                           + _E6 * K[5][i] + _E7 * K[6][i])
        en = _err_norm(y, ynew, err, rtol, atol)
        if en <= 1.0:
            # dense output for grid points inside (t, t_new]
            while k < ng and direction * (grid[k] - t_new) <= 0:
                x = (grid[k] - t) / hs
                for i in range(n):
                    acc = 0.0j
                    for s in range(7):
                        q = _P[s, 0] * x + _P[s, 1] * x * x + _P[s, 2] * x ** 3 + _P[s, 3] * x ** 4
                        acc += K[s][i] * q
                    samples[k, i] = y[i] + hs * acc
                k += 1
            t = t_new
            for i in range(n):
                y[i] = ynew[i]
                K[0][i] = K[6][i]
            accepted += 1
            if en == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, 0.9 * en ** -0.2)
            h = min(h * fac, max_step)
        else:
            rejected += 1
            h = h * max(0.2, 0.9 * en ** -0.2)
    while k < ng:
        for i in range(n):
            samples[k, i] = y[i]
        k += 1
    return y, samples, accepted, rejected, status


def family_code(desc):
    """Map a descriptor to (code, params) for the compiled kernels."""
    from . import pulses

    if isinstance(desc, pulses.DdpOptimized):
        hyper = isinstance(desc.mask, pulses.Hypergaussian)
        return DDP, np.array([desc.omega0, desc.final_angle, desc.shape.steepness, desc.shape.T,
                              1.0 if hyper else 0.0,
                              desc.mask.order if hyper else 1.0,
                              desc.mask.width if hyper else 1.0])
    if isinstance(desc, pulses.FractionalGaussian):
        return FGAUSS, np.array([desc.omega0, desc.tau, desc.T, desc.alpha])
    if isinstance(desc, pulses.Gaussian):
        return GAUSS, np.array([desc.omega0, desc.tau, desc.T, 0.0])
    if isinstance(desc, pulses.TwoStateConstantEps):
        return CONST_EPS, np.array([desc.eps0, desc.shape.steepness, desc.shape.T])
    if isinstance(desc, pulses.LandauZener):
        return LZ, np.array([desc.omega0, desc.rate])
    raise TypeError(f"no compiled kernel for {type(desc).__name__}")
