"""Backend selection for the hot numeric loops.

The jitted implementations are used by default.  Set the environment
variable CRYSTALSURF_NO_NUMBA=1 (before import) to force the pure-numpy
path; the same fallback engages automatically when numba is not
installed.  `benchmarks/bench_backends.py` times the two side by side.
"""

import os

_flag = os.environ.get("CRYSTALSURF_NO_NUMBA", "").strip().lower()
_numba_wanted = _flag not in ("1", "true", "yes", "on")

if _numba_wanted:
    try:
        from . import _impl_numba as _impl
        USING_NUMBA = True
    except ImportError:
        from . import _impl_numpy as _impl
        USING_NUMBA = False
else:
    from . import _impl_numpy as _impl
    USING_NUMBA = False

g_quad_scalar = _impl.g_quad_scalar
g_quad_pairs = _impl.g_quad_pairs
mol_evolve = _impl.mol_evolve


def backend_name():
    """Name of the active hot-loop backend: 'numba' or 'numpy'."""
    return "numba" if USING_NUMBA else "numpy"
