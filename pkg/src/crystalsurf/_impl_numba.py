"""Numba-jitted twins of the hot loops in `_impl_numpy`.

Same algorithms, same tolerances; scalar loops instead of broadcasting.
Importing this module requires numba; `crystalsurf._backend` falls back to
the numpy implementations when numba is missing or disabled.
"""

import numpy as np
from numba import njit

QUAD_START_PANELS = 8
QUAD_MAX_PANELS = 2 ** 16
QUAD_RTOL = 1e-10


@njit(cache=True)
def _g_integrand(s, tau, n_dim, beta):
    c = (4.0 * (n_dim - 1) * beta + 1.0) / 4.0
    h1 = tau * (s ** n_dim - tau ** n_dim) / n_dim
    if n_dim == 2:
        g2 = 0.5 * tau * s * s * np.log(s / tau) - 0.25 * tau * (s * s - tau * tau)
    else:
        g2 = ((1.0 / n_dim) * tau * s ** n_dim
              - 0.5 * s * s * tau ** (n_dim - 1)
              + (n_dim - 2) / (2.0 * n_dim) * tau ** (n_dim + 1)) / (n_dim - 2)
    return (-beta * h1 + c * g2) / s ** (n_dim - 1)


@njit(cache=True)
def _simpson(tau, r, m, n_dim, beta):
    dp = (r - tau) / m
    acc = _g_integrand(tau, tau, n_dim, beta) + _g_integrand(r, tau, n_dim, beta)
    for i in range(1, m, 2):
        acc += 4.0 * _g_integrand(tau + i * dp, tau, n_dim, beta)
    for i in range(2, m - 1, 2):
        acc += 2.0 * _g_integrand(tau + i * dp, tau, n_dim, beta)
    return dp / 3.0 * acc


@njit(cache=True)
def g_quad_scalar(tau, r, n_dim, beta):
    if tau <= 0.0 or r <= tau:
        return 0.0
    prev = _simpson(tau, r, QUAD_START_PANELS, n_dim, beta)
    m = 2 * QUAD_START_PANELS
    while m <= QUAD_MAX_PANELS:
        cur = _simpson(tau, r, m, n_dim, beta)
        tol = QUAD_RTOL * max(max(1.0, r ** 4), abs(cur))
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
        m *= 2
    return prev


@njit(cache=True)
def g_quad_pairs(taus, rs, n_dim, beta):
    out = np.zeros(taus.size)
    for i in range(taus.size):
        out[i] = g_quad_scalar(taus[i], rs[i], n_dim, beta)
    return out


@njit(cache=True)
def mol_evolve(psi, lam, a0, h, t_end, dt_max, sample_ts):
    n = psi.size
    rho = a0 * psi.copy()
    n_samples = sample_ts.size
    out = np.zeros((n_samples, n))
    si = 0
    t = 0.0
    if sample_ts[0] <= 0.0:
        out[0] = rho
        si = 1
    steps = 0
    c0 = a0 ** (-4.0)
    w = np.zeros(n)
    trial = np.zeros(n - 4)
    while si < n_samples:
        target = sample_ts[si]
        rmax = 1e-30
        for i in range(n):
            if abs(rho[i]) > rmax:
                rmax = abs(rho[i])
        dt_stab = h ** 4 / (48.0 * rmax ** 4)
        dt = min(dt_max, min(dt_stab, target - t))
        while True:
            ok = True
            for i in range(1, n - 1):
                w[i] = (rho[i + 1] ** 3 - 2.0 * rho[i] ** 3 + rho[i - 1] ** 3) / (h * h)
            for i in range(2, n - 2):
                lap2 = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (h * h)
                val = rho[i] - dt * rho[i] * rho[i] * lap2
                trial[i - 2] = val
                if val < 0.0:
                    ok = False
            if ok:
                break
            dt *= 0.5
            if dt < 1e-15 * t_end:
                return out, steps, 1
        t += dt
        for i in range(2, n - 2):
            rho[i] = trial[i - 2]
        amp = (c0 + 4.0 * lam * t) ** (-0.25)
        rho[0] = 0.0
        rho[n - 1] = 0.0
        rho[1] = amp * psi[1]
        rho[n - 2] = amp * psi[n - 2]
        steps += 1
        if t >= target - 1e-14 * t_end:
            out[si] = rho
            si += 1
    return out, steps, 0
