"""Optional numba acceleration.

Set ``ABMODE_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
path. Both paths are kept numerically equivalent and are cross-checked in
the test suite.
"""
from __future__ import annotations

import os

_DISABLED = os.environ.get("ABMODE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER = "workqueue"
    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

    prange = range

USE_NUMBA = HAVE_NUMBA


def set_threads(n: int | None) -> int:
    """Cap the worker threads used by parallel kernels; returns the effective count."""
    if not HAVE_NUMBA:
        return 1
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if n is None else max(1, min(int(n), limit))
    numba.set_num_threads(n)
    return n
