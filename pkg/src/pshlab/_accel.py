"""JIT switch for the numeric kernels.

Kernels are written once in a numba-compatible subset of Python/numpy. When
``PSHLAB_DISABLE_NUMBA`` is set to a truthy value (or numba is missing) the
decorator is a no-op and the same functions run as plain Python.
"""

from __future__ import annotations

import os

_FALSY = {"", "0", "false", "no", "off"}

NUMBA_REQUESTED = os.environ.get("PSHLAB_DISABLE_NUMBA", "").strip().lower() in _FALSY

try:
    if not NUMBA_REQUESTED:
        raise ImportError
    from numba import njit as _numba_njit
except ImportError:
    _numba_njit = None

USING_NUMBA = _numba_njit is not None


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity otherwise."""
    if _numba_njit is not None:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend() -> str:
    return "numba" if USING_NUMBA else "python"
