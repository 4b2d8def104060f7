"""Numba switch for the numeric kernels.

Set ``SOCIALMEM_DISABLE_NUMBA=1`` to run every kernel on its numpy/CPython
fallback. The flag is read once at import time.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("SOCIALMEM_DISABLE_NUMBA", "").strip().lower()

try:  # pragma: no cover - import guard
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_ENABLED = numba is not None and _FLAG in ("", "0", "false", "no")


def jit(fallback=None):
    """Compile ``fn`` with ``numba.njit`` when enabled.

    When numba is off, ``fallback`` is returned if given, otherwise the
    undecorated function runs under CPython.
    """

    def decorate(fn):
        if NUMBA_ENABLED:
            return numba.njit(cache=True, nogil=True)(fn)
        return fallback if fallback is not None else fn

    return decorate


def backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
