"""Kernel backend selection.

``MMSAR_BACKEND=numpy`` forces the pure-numpy kernels and skips importing
numba entirely. Any other value (default ``numba``) uses the jitted kernels
when numba is importable and silently falls back otherwise.
"""
from __future__ import annotations

import contextlib
import logging
import os
import warnings

log = logging.getLogger(__name__)

warnings.filterwarnings("ignore", message="The TBB threading layer")

_requested = os.environ.get("MMSAR_BACKEND", "numba").strip().lower()

HAS_NUMBA = False
if _requested != "numpy":
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        log.warning("numba not importable, using numpy kernels")

if HAS_NUMBA:
    from numba import njit, prange
else:

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

    prange = range

_active = "numba" if HAS_NUMBA else "numpy"


def active() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    name = name.lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable")
    _active = name


@contextlib.contextmanager
def use_backend(name: str):
    prev = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def max_threads() -> int:
    if HAS_NUMBA:
        import numba

        return numba.config.NUMBA_NUM_THREADS
    return 1


def set_threads(n: int | None) -> int:
    """Cap the kernel worker count. Results do not depend on it."""
    if not HAS_NUMBA:
        return 1
    import numba

    if n is None:
        env = os.environ.get("MMSAR_THREADS")
        n = int(env) if env else max_threads()
    n = max(1, min(int(n), max_threads()))
    numba.set_num_threads(n)
    return n


@contextlib.contextmanager
def threads(n: int):
    if not HAS_NUMBA:
        yield 1
        return
    import numba

    prev = numba.get_num_threads()
    try:
        yield set_threads(n)
    finally:
        numba.set_num_threads(prev)
