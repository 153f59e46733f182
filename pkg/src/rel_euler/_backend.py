"""Kernel backend selection.

Set ``REL_EULER_BACKEND=numpy`` to force the pure-numpy code paths; the
default uses numba when it imports cleanly.  ``REL_EULER_THREADS`` caps the
number of worker threads used by numba and the process pools.
"""
from __future__ import annotations

import os

_requested = os.environ.get("REL_EULER_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"REL_EULER_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    if _requested == "numpy":
        raise ImportError
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

    prange = range

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def max_threads() -> int:
    """Worker cap from REL_EULER_THREADS (defaults to the CPU count)."""
    raw = os.environ.get("REL_EULER_THREADS")
    n = os.cpu_count() or 1
    if raw:
        try:
            n = max(1, min(n, int(raw)))
        except ValueError:
            raise ValueError(f"REL_EULER_THREADS must be an integer, got {raw!r}") from None
    return n


if HAVE_NUMBA:
    try:
        numba.set_num_threads(min(max_threads(), numba.config.NUMBA_NUM_THREADS))
    except Exception:  # pragma: no cover
        pass
