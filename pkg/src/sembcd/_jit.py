"""Numba switch.

The hot kernels in :mod:`sembcd._kernels` are compiled with numba unless the
environment variable ``SEM_BCD_JIT`` is set to ``0`` (or ``false``/``off``),
in which case the numpy/scipy fallbacks are bound instead.  The flag is read
once at import time.
"""
from __future__ import annotations

import os

_FALSY = {"0", "false", "no", "off"}

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    numba = None
    NUMBA_AVAILABLE = False

JIT_ENABLED = NUMBA_AVAILABLE and os.environ.get("SEM_BCD_JIT", "1").strip().lower() not in _FALSY


def njit(func):
    """Compile ``func`` in nopython mode when JIT is enabled, else return it."""
    if JIT_ENABLED:
        return numba.njit(cache=True)(func)
    return func


def backend() -> str:
    return "numba" if JIT_ENABLED else "numpy"
