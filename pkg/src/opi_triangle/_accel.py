"""Numba switch for the hot kernels.

Set ``OPI_TRIANGLE_NO_NUMBA=1`` to run every kernel through its pure-numpy
path. The flag is read once at import time.
"""
import os

_flag = os.environ.get("OPI_TRIANGLE_NO_NUMBA", "").strip().lower()
USE_NUMBA = _flag in ("", "0", "false", "no")

try:
    from numba import njit as _numba_njit
except ImportError:  # pragma: no cover - numba is a hard dependency
    _numba_njit = None
    USE_NUMBA = False

HAVE_NUMBA = _numba_njit is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if _numba_njit is not None:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def select(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
