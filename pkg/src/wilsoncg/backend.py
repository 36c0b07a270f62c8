"""Kernel backend selection.

Two interchangeable kernel implementations exist: a numba-jitted one
(``_kernels_numba``) and a vectorized pure-numpy one (``_kernels_numpy``).
Both realize the identical real-arithmetic DAG, so their outputs agree
bit for bit; the numba path is simply faster.

Environment:

``WILSONCG_BACKEND``
    ``numba`` | ``numpy`` | ``auto`` (default).  ``auto`` picks numba when
    importable.  Requesting numba without numba installed falls back to
    numpy with a warning.

``WILSONCG_THREADS``
    Integer cap on kernel threads.  Kernels are compiled for one thread
    per sweep (results must be bitwise reproducible), so this only caps
    numba's thread pool; it never increases parallelism.
"""

import os
import warnings

BACKEND_ENV = "WILSONCG_BACKEND"
THREADS_ENV = "WILSONCG_THREADS"

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def _apply_thread_cap():
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw or not HAS_NUMBA:
        return
    try:
        n = int(raw)
    except ValueError:
        warnings.warn(f"{THREADS_ENV}={raw!r} is not an integer; ignored")
        return
    if n < 1:
        warnings.warn(f"{THREADS_ENV} must be >= 1; ignored")
        return
    import numba as _nb

    _nb.set_num_threads(min(n, _nb.config.NUMBA_NUM_THREADS))


def _resolve():
    raw = os.environ.get(BACKEND_ENV, "auto").strip().lower() or "auto"
    if raw == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    if raw == "numba":
        if not HAS_NUMBA:
            warnings.warn("numba requested but not importable; using numpy")
            return "numpy"
        return "numba"
    if raw == "numpy":
        return "numpy"
    warnings.warn(f"unknown {BACKEND_ENV}={raw!r}; using auto")
    return "numba" if HAS_NUMBA else "numpy"


_ACTIVE = _resolve()
_apply_thread_cap()


def active():
    """Name of the backend serving kernel calls: 'numba' or 'numpy'."""
    return _ACTIVE


def available():
    return ("numba", "numpy") if HAS_NUMBA else ("numpy",)


def kernels(name=None):
    """Import and return the kernel module for `name` (default: active)."""
    name = name or _ACTIVE
    if name == "numba":
        if not HAS_NUMBA:
            raise ImportError("numba backend requested but numba is missing")
        from . import _kernels_numba as mod
    elif name == "numpy":
        from . import _kernels_numpy as mod
    else:
        raise ValueError(f"unknown backend {name!r}")
    return mod
