"""Compiled closed-loop vector fields and the fixed-step RK4 loop.

State layouts (n = plant order):

    ARCH_L1AC   [x(n), u, x_hat(n), theta_hat(n)]
    ARCH_PI     [x(n), v]
    ARCH_PPI    [x(n), v, x_hat(n), theta_hat(n)]        u = v - K_P^T x
    ARCH_EQUIV  [L1AC block (3n+1), x_pi(n), v]          two loops, one estimator
"""
import numpy as np
from numba import njit

ARCH_L1AC = 0
ARCH_PI = 1
ARCH_PPI = 2
ARCH_EQUIV = 3

EST_TRUE = 0
EST_FROZEN = 1
EST_SCRIPTED = 2


@njit(cache=True)
def _companion_apply(coef, z, out, input_):
    n = z.size
    for i in range(n - 1):
        out[i] = z[i + 1]
    acc = 0.0
    for i in range(n):
        acc -= coef[i] * z[i]
    out[n - 1] = acc + input_


@njit(cache=True)
def _estimator(t, est, x, xh, th, gamma, pb, amp, omega, phase, out):
    n = x.size
    if est == EST_TRUE:
        e = 0.0
        for i in range(n):
            e += (xh[i] - x[i]) * pb[i]
        for i in range(n):
            out[i] = gamma * x[i] * e
    elif est == EST_FROZEN:
        for i in range(n):
            out[i] = 0.0
    else:
        for i in range(n):
            out[i] = amp[i] * omega * np.cos(omega * t + phase[i])


@njit(cache=True)
def closed_loop_field(t, y, arch, est, n, a, am, k, gamma, pb, theta, KI, KP, amp, omega, phase):
    dy = np.empty_like(y)
    x = y[:n]
    if arch == ARCH_PI:
        v = y[n]
        u = v
        for i in range(n):
            u -= KP[i] * x[i]
        _companion_apply(a, x, dy[:n], u)
        acc = 0.0
        for i in range(n):
            acc -= KI[i] * x[i]
        dy[n] = acc
        return dy

    xh = y[n + 1 : 2 * n + 1]
    th = y[2 * n + 1 : 3 * n + 1]
    thx = 0.0
    for i in range(n):
        thx += th[i] * x[i]

    if arch == ARCH_PPI:
        v = y[n]
        u = v
        for i in range(n):
            u -= KP[i] * x[i]
        _companion_apply(a, x, dy[:n], u)
        acc = 0.0
        for i in range(n):
            acc += -KI[i] * x[i] + k * (th[i] - theta[i]) * x[i]
        dy[n] = acc
    else:
        u = y[n]
        _companion_apply(a, x, dy[:n], u)
        dy[n] = -k * (u - thx)

    _companion_apply(am, xh, dy[n + 1 : 2 * n + 1], -(thx - u))
    _estimator(t, est, x, xh, th, gamma, pb, amp, omega, phase, dy[2 * n + 1 : 3 * n + 1])

    if arch == ARCH_EQUIV:
        o = 3 * n + 1
        xp = y[o : o + n]
        v = y[o + n]
        upi = v
        for i in range(n):
            upi -= KP[i] * xp[i]
        _companion_apply(a, xp, dy[o : o + n], upi)
        acc = 0.0
        for i in range(n):
            acc += -KI[i] * xp[i] + k * (th[i] - theta[i]) * xp[i]
        dy[o + n] = acc
    return dy


@njit(cache=True)
def rk4_loop(f, y0, dt, nsteps, sample_every, threshold, clamp_lo, clamp_hi, radius, args):
    """Classical RK4 with decimated sampling and blow-up detection.

    Returns ``(samples, n_samples, diverged_step)``; ``diverged_step`` is -1
    when the horizon was reached.  ``radius <= 0`` disables the clamp.
    """
    d = y0.size
    nsamp = nsteps // sample_every + 1
    out = np.empty((nsamp, d))
    y = y0.copy()
    out[0] = y
    s = 1
    h2 = 0.5 * dt
    h6 = dt / 6.0
    for i in range(nsteps):
        t = i * dt
        k1 = f(t, y, *args)
        k2 = f(t + h2, y + h2 * k1, *args)
        k3 = f(t + h2, y + h2 * k2, *args)
        k4 = f(t + dt, y + dt * k3, *args)
        y = y + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if radius > 0.0:
            nrm = 0.0
            for j in range(clamp_lo, clamp_hi):
                nrm += y[j] * y[j]
            nrm = np.sqrt(nrm)
            if nrm > radius:
                for j in range(clamp_lo, clamp_hi):
                    y[j] *= radius / nrm
        bad = False
        for j in range(d):
            if not np.isfinite(y[j]) or abs(y[j]) > threshold:
                bad = True
                break
        if bad:
            return out, s, i + 1
        if (i + 1) % sample_every == 0:
            out[s] = y
            s += 1
    return out, s, -1
