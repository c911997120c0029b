"""Shared low-level numerical primitives.

Uniform grids on intervals and rectangles, composite Simpson quadrature,
banded direct solves, and second-order finite-difference Laplacians
(Cartesian 1-D/2-D and the radial form u'' + (N-1)/r u' with a symmetric
stencil at r = 0).  Everything here is a pure function of its inputs.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg


# ---------------------------------------------------------------------------
# grid and field containers
# ---------------------------------------------------------------------------

@dataclass
class Grid:
    """Uniform tensor grid on an interval (dim=1) or rectangle (dim=2).

    Nodes are indexed flat, row-major for dim=2.  `interior_nodes` and
    `boundary_nodes` are disjoint flat index arrays covering all nodes;
    every interior node has a full stencil of neighbors.
    """

    dim: int
    h: float
    shape: tuple
    extent: tuple

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        self.shape = tuple(int(m) for m in self.shape)
        if len(self.shape) != self.dim or any(m < 3 for m in self.shape):
            raise ValueError(f"bad shape {self.shape} for dim {self.dim}")

    @classmethod
    def interval(cls, a=0.0, b=1.0, n=65):
        if n < 3 or b <= a:
            raise ValueError("need n >= 3 nodes and b > a")
        return cls(dim=1, h=(b - a) / (n - 1), shape=(n,), extent=(float(a), float(b)))

    @classmethod
    def square(cls, n=33, a=0.0, b=1.0):
        if n < 3 or b <= a:
            raise ValueError("need n >= 3 nodes per side and b > a")
        return cls(dim=2, h=(b - a) / (n - 1), shape=(n, n),
                   extent=((float(a), float(b)), (float(a), float(b))))

    @property
    def n_nodes(self):
        return int(np.prod(self.shape))

    @cached_property
    def interior_nodes(self):
        if self.dim == 1:
            return np.arange(1, self.shape[0] - 1)
        ny, nx = self.shape
        mask = np.zeros(self.shape, dtype=bool)
        mask[1:-1, 1:-1] = True
        return np.nonzero(mask.ravel())[0]

    @cached_property
    def boundary_nodes(self):
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.interior_nodes] = False
        return np.nonzero(mask)[0]

    def coordinates(self):
        """Node coordinates: (x,) for dim=1, (x, y) flat arrays for dim=2."""
        if self.dim == 1:
            a, b = self.extent
            return (np.linspace(a, b, self.shape[0]),)
        (ax, bx), (ay, by) = self.extent
        y, x = np.meshgrid(np.linspace(ay, by, self.shape[0]),
                           np.linspace(ax, bx, self.shape[1]), indexing="ij")
        return x.ravel(), y.ravel()


@dataclass
class Field:
    """Nodal values on a Grid; one finite value per node."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.values.size != self.grid.n_nodes:
            raise ValueError(f"field has {self.values.size} values for "
                             f"{self.grid.n_nodes} nodes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must all be finite")


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def quad_simpson(samples, spacing):
    """Composite Simpson on equally spaced samples.

    Odd sample counts use pure Simpson (exact for cubics); even counts use
    Simpson on the first panels and a trapezoid on the last one.
    """
    y = np.asarray(samples, dtype=np.float64).ravel()
    if y.size < 2:
        raise ValueError("quad_simpson needs at least 2 samples")
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    h = float(spacing)
    if y.size == 2:
        return h * 0.5 * (y[0] + y[1])
    if y.size % 2 == 1:
        return (h / 3.0) * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-2:2].sum())
    core = (h / 3.0) * (y[0] + y[-2] + 4.0 * y[1:-2:2].sum() + 2.0 * y[2:-3:2].sum())
    return core + h * 0.5 * (y[-2] + y[-1])


def volterra_weights(n):
    """Quadrature weight matrix W for running integrals on a uniform grid.

    Row i holds weights such that spacing * W[i] @ f approximates
    int_0^{x_i} f (row 0 is zero).  Rows use the trapezoid rule with the
    Euler-Maclaurin h^2/12 endpoint correction built from one-sided
    three-point derivative stencils (the first Gregory rule; on two panels
    it coincides with Simpson, on three with the 3/8 rule).  Unlike a
    Simpson rule with a parity fallback, the truncation error varies
    smoothly with the endpoint index, so discrete Laplacians of the
    running integral stay second-order accurate.  All weights are
    positive, preserving integrand sign bounds.
    """
    W = np.zeros((n, n))
    if n > 1:
        W[1, 0] = W[1, 1] = 0.5
    for i in range(2, n):
        W[i, 0] = W[i, i] = 0.5
        W[i, 1:i] = 1.0
        W[i, [0, 1, 2]] += np.array([-3.0, 4.0, -1.0]) / 24.0
        W[i, [i, i - 1, i - 2]] += np.array([-3.0, 4.0, -1.0]) / 24.0
    return W


# ---------------------------------------------------------------------------
# banded linear algebra
# ---------------------------------------------------------------------------

@dataclass
class BandedMatrix:
    """Square banded matrix in LAPACK band storage ab[u + i - j, j] = A[i, j]."""

    ab: np.ndarray
    l: int
    u: int

    def __post_init__(self):
        self.ab = np.asarray(self.ab, dtype=np.float64)
        if self.ab.ndim != 2 or self.ab.shape[0] != self.l + self.u + 1:
            raise ValueError("band storage must have l + u + 1 rows")

    @property
    def n(self):
        return self.ab.shape[1]

    @classmethod
    def tridiagonal(cls, lower, diag, upper):
        n = len(diag)
        ab = np.zeros((3, n))
        ab[0, 1:] = upper
        ab[1, :] = diag
        ab[2, :-1] = lower
        return cls(ab=ab, l=1, u=1)

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        n = self.n
        y = np.zeros(n)
        for d in range(-self.l, self.u + 1):
            row = self.u - d
            if d >= 0:
                y[:n - d] += self.ab[row, d:] * x[d:]
            else:
                y[-d:] += self.ab[row, :n + d] * x[:n + d]
        return y

    def to_dense(self):
        n = self.n
        a = np.zeros((n, n))
        for d in range(-self.l, self.u + 1):
            row = self.u - d
            if d >= 0:
                a[np.arange(n - d), np.arange(d, n)] = self.ab[row, d:]
            else:
                a[np.arange(-d, n), np.arange(n + d)] = self.ab[row, :n + d]
        return a


def solve_banded(matrix, rhs):
    """Direct solve of matrix @ x = rhs for a BandedMatrix.

    Singular matrices raise scipy's LinAlgError from the factorization.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != matrix.n:
        raise ValueError(f"rhs length {rhs.shape[0]} != matrix size {matrix.n}")
    return scipy.linalg.solve_banded((matrix.l, matrix.u), matrix.ab, rhs)


# ---------------------------------------------------------------------------
# finite-difference Laplacians
# ---------------------------------------------------------------------------

def laplacian_1d(values, h):
    """Three-point Laplacian; NaN at the two end nodes (no stencil)."""
    y = np.asarray(values, dtype=np.float64)
    out = np.full(y.shape, np.nan)
    out[1:-1] = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / (h * h)
    return out


def laplacian_radial(values, h, n_dim):
    """Radial Laplacian u'' + (N-1)/r u' on a uniform grid starting at r=0.

    The r = 0 node uses the symmetry stencil 2N (u_1 - u_0)/h^2; the last
    node has no right neighbor and is NaN.
    """
    y = np.asarray(values, dtype=np.float64)
    n = y.size
    r = h * np.arange(n)
    out = np.full(n, np.nan)
    out[0] = 2.0 * n_dim * (y[1] - y[0]) / (h * h)
    out[1:-1] = ((y[2:] - 2.0 * y[1:-1] + y[:-2]) / (h * h)
                 + (n_dim - 1) / r[1:-1] * (y[2:] - y[:-2]) / (2.0 * h))
    return out


def laplacian_2d(values2d, h):
    """Five-point Laplacian on a 2-D array; NaN on the rim."""
    z = np.asarray(values2d, dtype=np.float64)
    out = np.full(z.shape, np.nan)
    out[1:-1, 1:-1] = (z[1:-1, 2:] + z[1:-1, :-2] + z[2:, 1:-1] + z[:-2, 1:-1]
                       - 4.0 * z[1:-1, 1:-1]) / (h * h)
    return out


def laplacian_apply(f, radial_dim=None):
    """Discrete Laplacian of a Field, valid on interior nodes.

    Returns a flat array shaped like the field with NaN wherever the
    stencil does not fit (boundary nodes; for the radial variant only the
    right endpoint, since r = 0 is handled by the symmetry stencil).
    `radial_dim` switches a 1-D grid starting at 0 to the radial operator
    with that space dimension.
    """
    if radial_dim is not None:
        if f.grid.dim != 1:
            raise ValueError("radial mode requires a 1-D grid")
        if abs(f.grid.extent[0]) > 1e-14:
            raise ValueError("radial mode requires the grid to start at r = 0")
        return laplacian_radial(f.values, f.grid.h, radial_dim)
    if f.grid.dim == 1:
        return laplacian_1d(f.values, f.grid.h)
    return laplacian_2d(f.values.reshape(f.grid.shape), f.grid.h).ravel()


def trapezoid_weights(grid):
    """Trapezoid quadrature weights per node (flat array) for a Grid."""
    def line(n):
        w = np.ones(n)
        w[0] = w[-1] = 0.5
        return w
    if grid.dim == 1:
        return grid.h * line(grid.shape[0])
    wy = line(grid.shape[0])
    wx = line(grid.shape[1])
    return (grid.h * grid.h) * np.outer(wy, wx).ravel()
