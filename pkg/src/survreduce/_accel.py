"""Backend selection for the hot numeric kernels.

Every kernel in :mod:`survreduce.kernels` exists twice: a numba ``@njit``
loop and a vectorised pure-numpy version. The environment variable
``SURVREDUCE_BACKEND`` picks one at import time (``numba`` or ``numpy``);
numba is used when available and not disabled.
"""
import os
from contextlib import contextmanager

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

_requested = os.environ.get("SURVREDUCE_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"SURVREDUCE_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

_backend = "numba" if (_requested == "numba" and NUMBA_AVAILABLE) else "numpy"


def njit(fn):
    """Compile ``fn`` with numba when available, else return it untouched."""
    if NUMBA_AVAILABLE:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def backend():
    return _backend


def use_numba():
    return _backend == "numba"


def set_backend(name):
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    _backend = name


@contextmanager
def using_backend(name):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)
