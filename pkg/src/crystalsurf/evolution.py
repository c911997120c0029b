"""Separable solutions rho = A(t) psi(x) of the surface evolution equation.

Once psi solves psi Lap^2 psi^3 = lambda, the amplitude obeys
A' = -lambda A^5, with the closed form A(t) = (A(0)^-4 + 4 lambda t)^(-1/4).
Every Sobolev-type norm of rho then decays like (c2 + 4 lambda t)^(-1/4).
This module checks those facts against discrete states and integrates the
full equation d_t rho = -rho^2 Lap^2 rho^3 directly (explicit adaptive
method of lines) to confirm the product solution.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from .elliptic import EllipticState, equation_residual_values
from .numerics import Field, laplacian_apply, trapezoid_weights


@dataclass(frozen=True)
class AmplitudeParams:
    """Initial amplitude A(0) and eigenvalue lambda, both positive."""

    a0: float
    lam: float

    def __post_init__(self):
        if not (self.a0 > 0 and self.lam > 0):
            raise ValueError("a0 and lambda must both be positive")


def amplitude(t, p):
    """A(t) = (A(0)^-4 + 4 lambda t)^(-1/4); strictly decreasing in t."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("amplitude is defined for t >= 0")
    out = (p.a0 ** (-4.0) + 4.0 * p.lam * t) ** (-0.25)
    return float(out) if out.ndim == 0 else out


def amplitude_derivative(t, p):
    """Analytic A'(t) = -lambda (A(0)^-4 + 4 lambda t)^(-5/4)."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("amplitude is defined for t >= 0")
    out = -p.lam * (p.a0 ** (-4.0) + 4.0 * p.lam * t) ** (-1.25)
    return float(out) if out.ndim == 0 else out


def separation_residual(state, times, a0=1.0, margin=0.2):
    """Normalized residual of d_t rho + rho^2 Lap_h^2 rho^3 for rho = A psi.

    The time derivative is analytic (-lambda A^5 psi); the spatial term is
    discrete, so the residual factors through the interior equation defect:
    A^5 psi (psi Lap_h^2 psi^3 - lambda).  Max over interior-margin nodes
    and the given times, normalized by max |d_t rho|.
    """
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if times.size == 0:
        raise ValueError("no times given")
    if np.any(times <= 0):
        raise ValueError("times must be positive")
    grid = state.grid
    psi = state.psi.values
    lap1 = np.nan_to_num(laplacian_apply(Field(grid, psi ** 3)), nan=0.0)
    lap2 = laplacian_apply(Field(grid, lap1))
    width = (grid.extent[1] - grid.extent[0]) if grid.dim == 1 \
        else (grid.extent[0][1] - grid.extent[0][0])
    from .elliptic import _distance_to_boundary
    keep = _distance_to_boundary(grid) >= max(margin * width, 2.0 * grid.h) - 1e-12 * width
    p = AmplitudeParams(a0, state.lam) if state.lam > 0 else None
    worst = 0.0
    for t in times:
        a = amplitude(t, p) if p is not None else a0
        rho = a * psi
        drho_dt = -state.lam * a ** 5 * psi
        res = drho_dt[keep] + rho[keep] ** 2 * (a ** 3 * lap2[keep])
        denom = float(np.max(np.abs(drho_dt[keep])))
        if denom == 0.0:
            continue  # lambda = 0: rho is constant in t and res vanishes
        worst = max(worst, float(np.max(np.abs(res))) / denom)
    return worst


def w22_norm(grid, values):
    """Discrete W^{2,2}-type norm: values + gradient + Laplacian, trapezoid."""
    tw = trapezoid_weights(grid)
    lap = np.nan_to_num(laplacian_apply(Field(grid, values)), nan=0.0)
    if grid.dim == 1:
        grad_sq = np.gradient(values, grid.h) ** 2
    else:
        gy, gx = np.gradient(values.reshape(grid.shape), grid.h)
        grad_sq = (gx ** 2 + gy ** 2).ravel()
    return float(np.sqrt(tw @ values ** 2 + tw @ grad_sq + tw @ lap ** 2))


@dataclass(frozen=True)
class DecayRow:
    t: float
    norm: float
    product: float  # norm * (a0^-4 + 4 lambda t)^(1/4); constant in t


def decay_norm_check(state, times, a0=1.0):
    """W^{2,2} norms of A(t) psi and their decay-compensated products.

    The product column is constant to roundoff because rho is a tensor
    product; the rows expose the (c2 + 4 lambda t)^(-1/4) decay clock with
    c1 = ||psi|| a0-scaled and c2 = a0^-4.
    """
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    p = AmplitudeParams(a0, state.lam)
    rows = []
    for t in times:
        nt = w22_norm(state.grid, amplitude(t, p) * state.psi.values)
        rows.append(DecayRow(t=float(t), norm=nt,
                             product=nt * (a0 ** (-4.0) + 4.0 * state.lam * t) ** 0.25))
    return rows


@dataclass
class Trajectory:
    """Sampled method-of-lines run with deviation from the product solution."""

    times: np.ndarray
    values: np.ndarray          # (n_samples, n_nodes)
    steps: int
    max_deviation: float
    evolved: slice              # node range actually time-stepped


def evolve_mol(state, t_end, dt, a0=1.0, n_samples=9):
    """Integrate d_t rho = -rho^2 Lap_h^2 rho^3 from rho0 = a0 psi (1-D).

    Explicit Euler with the step bounded by h^4/(48 max(rho)^4); steps that
    would produce a negative slope are halved and retried.  The outermost
    two nodes at each end follow the product solution A(t) psi (psi
    vanishes at the boundary itself), standing in for the degenerate
    boundary conditions.  Returns the sampled trajectory and its maximum
    deviation from A(t) psi over the evolved nodes.
    """
    if state.grid.dim != 1:
        raise ValueError("evolve_mol supports 1-D states only")
    if not t_end > 0 or not dt > 0:
        raise ValueError("t_end and dt must be positive")
    n = state.grid.shape[0]
    if n < 8:
        raise ValueError("grid too coarse to evolve (need >= 8 nodes)")
    psi = np.ascontiguousarray(state.psi.values)
    sample_ts = np.linspace(0.0, t_end, n_samples)
    out, steps, status = _backend.mol_evolve(
        psi, float(state.lam), float(a0), float(state.grid.h),
        float(t_end), float(dt), sample_ts)
    if status != 0:
        raise RuntimeError(
            "time step underflow (stiff): reduce t_end or coarsen the grid")
    p = AmplitudeParams(a0, state.lam) if state.lam > 0 else None
    evolved = slice(2, n - 2)
    dev = 0.0
    for j, t in enumerate(sample_ts):
        a = amplitude(t, p) if p is not None else a0
        dev = max(dev, float(np.max(np.abs(out[j, evolved] - a * psi[evolved]))))
    return Trajectory(times=sample_ts, values=out, steps=steps,
                      max_deviation=dev, evolved=evolved)


def product_deviation_bound(state, t_end, margin=0.2):
    """Reference bound 5 * interior_residual * t_end for evolve_mol drift."""
    return 5.0 * equation_residual_values(state.grid, state.psi.values,
                                          state.lam, margin) * t_end


def trajectory_to_csv(traj, path, grid):
    """Write t plus one column per node as CSV with a parameter header."""
    x, = grid.coordinates()
    lines = ["# crystalsurf evolution trajectory",
             "# columns: t then rho at x = " + " ".join(f"{xi:.6g}" for xi in x),
             "t," + ",".join(f"x{i}" for i in range(x.size))]
    for j, t in enumerate(traj.times):
        lines.append(f"{t:.17g}," + ",".join(f"{vv:.17g}" for vv in traj.values[j]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
