"""Pure-numpy implementations of the hot numeric loops.

Two loops dominate runtime: the adaptive Simpson quadrature of the radial
kernel G(tau, r) (needed per (tau, r) pair whenever no closed form exists,
i.e. for space dimensions 2 and 4), and the explicit method-of-lines time
stepper.  This module vectorizes both over numpy; `_impl_numba` holds the
jitted twins.  Selection happens in `crystalsurf._backend`.
"""

import numpy as np

QUAD_START_PANELS = 8
QUAD_MAX_PANELS = 2 ** 16
QUAD_RTOL = 1e-10
_PAIR_CHUNK = 128


def g_integrand(s, tau, n_dim, beta):
    """Integrand of the kernel integral G(tau, r) = int_tau^r F(s) ds.

    F(s) = -beta*H1(tau,s)/s^(N-1) + (4(N-1)beta+1)/4 * G2(tau,s)/s^(N-1).
    Only evaluated for 0 < tau <= s, so the N=2 logarithm is safe.
    """
    c = (4.0 * (n_dim - 1) * beta + 1.0) / 4.0
    h1 = tau * (s ** n_dim - tau ** n_dim) / n_dim
    if n_dim == 2:
        g2 = 0.5 * tau * s * s * np.log(s / tau) - 0.25 * tau * (s * s - tau * tau)
    else:
        g2 = ((1.0 / n_dim) * tau * s ** n_dim
              - 0.5 * s * s * tau ** (n_dim - 1)
              + (n_dim - 2) / (2.0 * n_dim) * tau ** (n_dim + 1)) / (n_dim - 2)
    return (-beta * h1 + c * g2) / s ** (n_dim - 1)


def _simpson_pairs(taus, rs, m, n_dim, beta):
    """Composite Simpson with m (even) panels for each (tau, r) pair."""
    t = np.linspace(0.0, 1.0, m + 1)
    s = taus[:, None] + (rs - taus)[:, None] * t[None, :]
    fy = g_integrand(s, taus[:, None], n_dim, beta)
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-2:2] = 2.0
    return (rs - taus) / (3.0 * m) * (fy @ w)


def _quad_chunk(taus, rs, n_dim, beta):
    prev = _simpson_pairs(taus, rs, QUAD_START_PANELS, n_dim, beta)
    out = prev.copy()
    active = np.arange(taus.size)
    m = 2 * QUAD_START_PANELS
    while active.size and m <= QUAD_MAX_PANELS:
        cur = _simpson_pairs(taus[active], rs[active], m, n_dim, beta)
        tol = QUAD_RTOL * np.maximum(np.maximum(1.0, rs[active] ** 4), np.abs(cur))
        done = np.abs(cur - prev) <= tol
        out[active] = cur
        active = active[~done]
        prev = cur[~done]
        m *= 2
    return out


def g_quad_pairs(taus, rs, n_dim, beta):
    """G(tau, r) for arrays of pairs, panel-doubling Simpson per pair.

    Pairs with tau == 0 or tau == r return exactly 0 (analytic limits).
    Refinement stops when two successive panel counts agree to QUAD_RTOL
    relative (floored by max(1, r^4)), capped at QUAD_MAX_PANELS.
    """
    taus = np.ascontiguousarray(taus, dtype=np.float64).ravel()
    rs = np.ascontiguousarray(rs, dtype=np.float64).ravel()
    out = np.zeros(taus.shape)
    live = np.nonzero((taus > 0.0) & (rs > taus))[0]
    for start in range(0, live.size, _PAIR_CHUNK):
        idx = live[start:start + _PAIR_CHUNK]
        out[idx] = _quad_chunk(taus[idx], rs[idx], n_dim, beta)
    return out


def g_quad_scalar(tau, r, n_dim, beta):
    """Scalar wrapper around g_quad_pairs."""
    return float(g_quad_pairs(np.array([tau]), np.array([r]), n_dim, beta)[0])


def mol_evolve(psi, lam, a0, h, t_end, dt_max, sample_ts):
    """Explicit adaptive time stepping of d_t rho = -rho^2 Lap^2 rho^3 in 1-D.

    Nodes 2..n-3 are evolved; the two nodes at each end are pinned to the
    product solution A(t)*psi (with psi = 0 at the outermost nodes).  The
    stable step is bounded by h^4 / (48 * max(rho)^4); a step producing a
    negative slope anywhere is rejected and retried at half the size.

    Returns (samples, n_steps, status) with status 0 on success and 1 on
    time-step underflow.
    """
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
    while si < n_samples:
        target = sample_ts[si]
        rmax = np.max(np.abs(rho))
        dt_stab = h ** 4 / (48.0 * max(rmax, 1e-30) ** 4)
        dt = min(dt_max, dt_stab, target - t)
        while True:
            rho3 = rho ** 3
            w = np.zeros(n)
            w[1:-1] = (rho3[2:] - 2.0 * rho3[1:-1] + rho3[:-2]) / (h * h)
            lap2 = (w[3:n - 1] - 2.0 * w[2:n - 2] + w[1:n - 3]) / (h * h)
            trial = rho[2:n - 2] - dt * rho[2:n - 2] ** 2 * lap2
            if np.all(trial >= 0.0):
                break
            dt *= 0.5
            if dt < 1e-15 * t_end:
                return out, steps, 1
        t += dt
        rho[2:n - 2] = trial
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
