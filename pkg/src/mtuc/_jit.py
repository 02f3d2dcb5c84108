"""Optional numba acceleration.

Set ``MTUC_DISABLE_JIT=1`` before import to force the pure-numpy kernels.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_JIT = HAVE_NUMBA and os.environ.get("MTUC_DISABLE_JIT", "0").lower() not in ("1", "true", "yes")


def njit(func):
    """Compile ``func`` in nopython mode with on-disk caching."""
    if not HAVE_NUMBA:  # pragma: no cover
        return func
    return numba.njit(cache=True, nogil=True)(func)
