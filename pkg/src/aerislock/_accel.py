"""Optional numba acceleration.

The hot loops in :mod:`aerislock.kernels` are compiled with ``numba.njit``
when numba is importable and the environment variable
``AERISLOCK_DISABLE_NUMBA`` is unset (or set to ``0``). Otherwise the
pure-numpy implementations are used. The flag is read once at import time.
"""

import os

_flag = os.environ.get("AERISLOCK_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError("numba disabled by AERISLOCK_DISABLE_NUMBA")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised with the env flag
    _njit = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or an identity decorator without numba."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
