"""Radial integral kernels for the self-similar profile equation.

The profile construction integrates the radial system twice, producing the
nested kernels

    H1(tau, r) = tau (r^N - tau^N) / N
    G1(tau, r) = tau (r^(N-2) - tau^(N-2)) / ((N-2) r^(N-2))   (tau log(r/tau) for N=2)
    G2(tau, r) = int_tau^r s^(N-1) G1(tau, s) ds
    G (tau, r) = -beta int_tau^r H1/s^(N-1) ds
                 + (4(N-1)beta + 1)/4 int_tau^r G2/s^(N-1) ds.

For N > 2, N != 4 the outer integral has the four-term closed form
implemented in `g_kernel_closed`; for N in {2, 4} the panel-doubling
quadrature `g_kernel_quad` is the authoritative evaluator.  All kernels
vanish at tau = 0 and tau = r and are nonnegative on 0 <= tau <= r when
-1/(4(N-1)) <= beta <= 0.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend


@dataclass(frozen=True)
class KernelParams:
    """Space dimension N, similarity exponent beta, derived alpha = (4*beta-1)/4."""

    n_dim: int
    beta: float
    alpha: float = None

    def __post_init__(self):
        if not isinstance(self.n_dim, (int, np.integer)) or isinstance(self.n_dim, bool):
            raise ValueError(f"n_dim must be an integer, got {self.n_dim!r}")
        if self.n_dim < 2:
            raise ValueError(f"n_dim must be >= 2, got {self.n_dim}")
        derived = (4.0 * self.beta - 1.0) / 4.0
        if self.alpha is None:
            object.__setattr__(self, "alpha", derived)
        elif abs(self.alpha - derived) > 1e-12:
            raise ValueError(f"alpha={self.alpha} inconsistent with "
                             f"(4*beta-1)/4={derived}")

    @property
    def beta_min(self):
        return -1.0 / (4.0 * (self.n_dim - 1))

    @property
    def in_positivity_range(self):
        """True iff -1/(4(N-1)) <= beta <= 0, the range where G >= 0."""
        return self.beta_min <= self.beta <= 0.0


def _check_domain(tau, r):
    tau = np.asarray(tau, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    scalar = tau.ndim == 0 and r.ndim == 0
    tau, r = np.broadcast_arrays(tau, r)
    if np.any(~np.isfinite(tau)) or np.any(~np.isfinite(r)):
        raise ValueError("kernel arguments must be finite")
    if np.any(tau < 0.0):
        raise ValueError("kernel arguments require tau >= 0")
    if np.any(tau > r):
        raise ValueError("kernel arguments require tau <= r")
    return tau, r, scalar


def _ret(values, scalar):
    return float(values) if scalar else values


def h1_kernel(tau, r, params):
    """H1(tau, r) = tau (r^N - tau^N) / N on 0 <= tau <= r."""
    tau, r, scalar = _check_domain(tau, r)
    n = params.n_dim
    return _ret(tau * (r ** n - tau ** n) / n, scalar)


def g1_kernel(tau, r, params):
    """G1(tau, r); the tau = 0 and tau = r limits are exact zeros."""
    tau, r, scalar = _check_domain(tau, r)
    n = params.n_dim
    out = np.zeros(tau.shape)
    m = (tau > 0.0) & (tau < r)
    if n == 2:
        out[m] = tau[m] * np.log(r[m] / tau[m])
    else:
        out[m] = tau[m] * (r[m] ** (n - 2) - tau[m] ** (n - 2)) / ((n - 2) * r[m] ** (n - 2))
    return _ret(out, scalar)


def g2_kernel(tau, r, params):
    """G2(tau, r) = int_tau^r s^(N-1) G1(tau, s) ds in closed form."""
    tau, r, scalar = _check_domain(tau, r)
    n = params.n_dim
    out = np.zeros(tau.shape)
    m = (tau > 0.0) & (tau < r)
    t, s = tau[m], r[m]
    if n == 2:
        out[m] = 0.5 * t * s ** 2 * np.log(s / t) - 0.25 * t * (s ** 2 - t ** 2)
    else:
        out[m] = ((1.0 / n) * t * s ** n - 0.5 * s ** 2 * t ** (n - 1)
                  + (n - 2) / (2.0 * n) * t ** (n + 1)) / (n - 2)
    return _ret(out, scalar)


def g_kernel_quad(tau, r, params):
    """G(tau, r) by panel-doubling Simpson quadrature (any N >= 2).

    Panels double until two refinements agree to 1e-10 relative, floored
    at 1e-10 * max(1, r^4) absolute and capped at 2^16 panels.
    """
    tau, r, scalar = _check_domain(tau, r)
    out = _backend.g_quad_pairs(tau.ravel(), r.ravel(), params.n_dim, params.beta)
    return _ret(out.reshape(tau.shape), scalar)


def g_kernel_closed(tau, r, params):
    """Closed-form G(tau, r) for N > 2, N != 4.

    Raises ValueError for N in {2, 4}, where only the quadrature form is
    available; see g_kernel_quad.
    """
    n = params.n_dim
    if n in (2, 4):
        raise ValueError(f"no closed form for n_dim={n}; use g_kernel_quad")
    tau, r, scalar = _check_domain(tau, r)
    b = params.beta
    out = np.zeros(tau.shape)
    m = (tau > 0.0) & (tau < r)
    t, s = tau[m], r[m]
    out[m] = ((4.0 * b + 1.0) / (8.0 * n * (n - 2)) * s ** 2 * t
              - (12.0 * b + 1.0) / (8.0 * (n - 2) * (n - 4)) * t ** 3
              - (4.0 * (n + 1) * b + 1.0) / (8.0 * n * (n - 2)) * s ** (2 - n) * t ** (n + 1)
              + (4.0 * (n - 1) * b + 1.0) / (8.0 * (n - 2) * (n - 4)) * s ** (4 - n) * t ** (n - 1))
    return _ret(out, scalar)


def g_kernel_dr(tau, r, params):
    """dG/dr(tau, r), exact for every N >= 2.

    r enters G only as the upper integration limit and G(r, r) = 0, so the
    derivative is the integrand at s = r:
    -beta H1(tau,r)/r^(N-1) + (4(N-1)beta+1)/4 * G2(tau,r)/r^(N-1).
    """
    tau, r, scalar = _check_domain(tau, r)
    n, b = params.n_dim, params.beta
    c = (4.0 * (n - 1) * b + 1.0) / 4.0
    out = np.zeros(tau.shape)
    m = (tau > 0.0) & (r > 0.0)
    rp = r[m] ** (n - 1)
    out[m] = (-b * h1_kernel(tau[m], r[m], params)
              + c * g2_kernel(tau[m], r[m], params)) / rp
    return _ret(out, scalar)


def g_kernel(tau, r, params):
    """G(tau, r) via the closed form when it exists, else quadrature."""
    if params.n_dim in (2, 4):
        return g_kernel_quad(tau, r, params)
    return g_kernel_closed(tau, r, params)


def kernel_matrix(r_grid, params):
    """Lower-triangular matrix G[i, j] = G(r_j, r_i) on a radial grid.

    Row i holds the kernel against every grid node up to r_i; entries with
    j > i are zero.  Closed form for N > 2, N != 4; backend quadrature
    otherwise.
    """
    r = np.asarray(r_grid, dtype=np.float64)
    n = r.size
    if params.n_dim in (2, 4):
        ii, jj = np.tril_indices(n)
        vals = _backend.g_quad_pairs(r[jj], r[ii], params.n_dim, params.beta)
        out = np.zeros((n, n))
        out[ii, jj] = vals
        return out
    rr = np.broadcast_to(r[:, None], (n, n))
    tt = np.minimum(np.broadcast_to(r[None, :], (n, n)), rr)
    return g_kernel_closed(tt, rr, params)
