"""Numba/numpy backend selection for the hot numeric loops.

Set VOLIFT_DISABLE_NUMBA=1 to force the pure-numpy fallback path. The
fallback is used automatically when numba is not importable.
"""
import os


def _noop_jit(*args, **kwargs):
    if args and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(f):
        return f

    return wrap


def _numba_available() -> bool:
    if os.environ.get("VOLIFT_DISABLE_NUMBA", "") not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USING_NUMBA = _numba_available()

if USING_NUMBA:
    from numba import njit
else:
    njit = _noop_jit


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
