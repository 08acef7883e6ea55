"""Backend selection for the numeric kernels.

Set ``QMN_BACKEND=numpy`` to force the pure-numpy path. Any other value (or
unset) uses numba when it can be imported.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

NUMBA_AVAILABLE = numba is not None
BACKEND = "numba" if NUMBA_AVAILABLE and os.environ.get("QMN_BACKEND", "numba").lower() != "numpy" else "numpy"


def njit(func):
    """Compile ``func`` in nopython mode, or hand it back untouched without numba."""
    if not NUMBA_AVAILABLE:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def select(numba_impl, numpy_impl):
    return numba_impl if BACKEND == "numba" else numpy_impl
