"""Backend selection for the hot kernels.

Every kernel in :mod:`bruijnregret._kernels` exists twice: a loop version
compiled with numba and a vectorized numpy version.  Set the environment
variable ``BRUIJNREGRET_NUMBA=0`` before import to force the numpy path.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("BRUIJNREGRET_NUMBA", "1").strip().lower()

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is available, else a no-op decorator."""
    if HAVE_NUMBA:
        from numba import njit as _njit

        kwargs.setdefault("cache", True)
        return _njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
