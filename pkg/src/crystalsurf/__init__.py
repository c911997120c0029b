"""crystalsurf: solvers for the crystal-surface slope equation.

The model is the degenerate fourth-order evolution
d_t rho + rho^2 Lap^2 rho^3 = 0 with rho = 0 and Lap rho^3 = 0 on the
boundary.  The package provides:

* `elliptic` - regularized fixed-point solves of the separable profile
  equation psi Lap^2 psi^3 = lambda, with k-continuation and diagnostics;
* `selfsimilar` - Picard iteration for radial self-similar profiles via a
  nonnegative Volterra kernel, with residual and growth-bound checks;
* `evolution` - the amplitude law A(t) = (A(0)^-4 + 4 lambda t)^(-1/4),
  decay-norm checks, and a direct method-of-lines integrator;
* `kernels`, `numerics` - the kernel formulas and finite-difference /
  quadrature primitives underneath;
* `cli` / `verification` - command-line runs and the acceptance suite.

Hot loops run through numba when available; set CRYSTALSURF_NO_NUMBA=1
for the pure-numpy fallback.
"""

from ._backend import USING_NUMBA, backend_name
from .errors import NonConvergenceError
from .kernels import (KernelParams, g1_kernel, g2_kernel, g_kernel,
                      g_kernel_closed, g_kernel_dr, g_kernel_quad, h1_kernel,
                      kernel_matrix)
from .numerics import (BandedMatrix, Field, Grid, laplacian_apply,
                       quad_simpson, solve_banded)
from .selfsimilar import (BoundsReport, PicardConfig, RadialProfile,
                          check_theorem_bounds, exact_linear_coefficient,
                          exact_linear_profile, extend_profile, ode_residual,
                          picard_apply, profile_to_csv, residual_sup,
                          solve_profile, spacetime_residual, weak_form_defect)
from .elliptic import (ContinuationResult, EllipticConfig, EllipticState,
                       T_map, continuation, energy_identity_defect,
                       energy_identity_terms, gradient_blowup_diagnostic,
                       harnack_floor, interior_residual, poisson_v,
                       poincare_ratio, solve_fixed_k, state_to_csv,
                       weighted_poisson_psi)
from .evolution import (AmplitudeParams, Trajectory, amplitude,
                        amplitude_derivative, decay_norm_check, evolve_mol,
                        separation_residual, w22_norm)

__version__ = "0.1.0"
