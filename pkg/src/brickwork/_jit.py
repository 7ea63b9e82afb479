"""Optional numba acceleration.

Set ``BRICKWORK_DISABLE_JIT=1`` to run every kernel as plain Python/numpy.
The flag is read once at import time.
"""

import os

_FLAG = os.environ.get("BRICKWORK_DISABLE_JIT", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def njit(func):
    if HAS_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def backend() -> str:
    return "numba" if HAS_NUMBA else "python"
