"""Switch between numba-compiled kernels and the plain interpreted fallback.

Set ``MATINGTREES_NO_NUMBA=1`` before import to run every kernel as ordinary
Python over numpy arrays.  Both paths execute the same function bodies, so the
fallback doubles as a readable reference and as a cross-check.
"""
import os

DISABLED = os.environ.get("MATINGTREES_NO_NUMBA", "").strip() not in ("", "0")

try:
    if DISABLED:
        raise ImportError("numba disabled by environment")
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def kernel(fn):
    """Compile ``fn`` in nopython mode when numba is active, else return it."""
    if HAVE_NUMBA:
        return _njit(cache=True, nogil=True)(fn)
    return fn


def backend():
    return "numba" if HAVE_NUMBA else "python"
