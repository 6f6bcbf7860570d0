"""Numba acceleration toggle.

Hot kernels are compiled with numba by default. Setting the environment
variable PERCLAW_NUMBA=0 before import selects the pure-numpy fallback
implementations instead (useful for debugging and for the speed comparison
in benchmarks/bench_kernels.py). The flag is read once, at import time.
"""

import os

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    _numba_njit = None
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and os.environ.get("PERCLAW_NUMBA", "1") != "0"


def njit(*args, **kwargs):
    """numba.njit when available, identity decorator otherwise."""
    if _numba_njit is not None:
        return _numba_njit(*args, **kwargs)
    if args and callable(args[0]):  # pragma: no cover
        return args[0]
    return lambda f: f  # pragma: no cover
