"""Numba availability switch.

Set ``OPINIONFIT_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels. When numba is missing the numpy path is used automatically.
"""
import os

_DISABLED = os.environ.get("OPINIONFIT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("numba disabled by OPINIONFIT_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap
