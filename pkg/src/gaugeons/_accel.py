"""Backend switch for the hot kernels.

Set ``GAUGEONS_DISABLE_NUMBA=1`` before import to run every kernel as plain
numpy.  The flag is read once, at import time.
"""
import os

_FALSE = {"", "0", "false", "no", "off"}

DISABLED = os.environ.get("GAUGEONS_DISABLE_NUMBA", "").strip().lower() not in _FALSE

try:
    if DISABLED:
        raise ImportError
    from numba import njit as _njit

    NUMBA = True
except ImportError:  # numba missing or switched off
    _njit = None
    NUMBA = False


def jit(fn):
    """Compile ``fn`` with numba when enabled, otherwise return it untouched."""
    if NUMBA:
        return _njit(cache=True, nogil=True)(fn)
    return fn


def backend():
    return "numba" if NUMBA else "numpy"
