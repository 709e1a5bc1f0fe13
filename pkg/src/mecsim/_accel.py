"""Numba switch for the hot kernels.

Set ``MECSIM_NUMBA=0`` to run every kernel as plain Python/numpy. The jitted
and interpreted paths execute the same arithmetic in the same order, so they
produce identical results.
"""
from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("MECSIM_NUMBA", "1") not in ("0", "false", "no")


def kernel(fn):
    """Compile ``fn`` with ``numba.njit`` when enabled, else return it unchanged.

    The undecorated function stays reachable as ``.py_func`` in both cases so
    tests and the benchmark can drive the interpreted path explicitly.
    """
    if USE_NUMBA:
        compiled = numba.njit(cache=True, nogil=True)(fn)
        return compiled
    fn.py_func = fn
    return fn


def backend() -> str:
    return "numba" if USE_NUMBA else "python"
