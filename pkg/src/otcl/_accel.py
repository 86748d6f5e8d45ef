"""Numba detection and the switch between compiled and pure-numpy kernels.

Set ``OTCL_DISABLE_NUMBA=1`` to force the numpy path even when numba is
installed.  The flag is read once at import time.
"""

import os

DISABLED = os.environ.get("OTCL_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    from numba import njit as _njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - depends on environment
    NUMBA_AVAILABLE = False
    _njit = None

USE_NUMBA = NUMBA_AVAILABLE and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise the identity decorator.

    Compiled variants are always built when numba exists (so the benchmark can
    compare both paths); ``USE_NUMBA`` decides which variant the library calls.
    """
    if NUMBA_AVAILABLE:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
