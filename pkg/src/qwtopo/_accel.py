"""Optional numba acceleration.

Set ``QWTOPO_BACKEND=numpy`` to force the pure-numpy kernels even when numba
is importable. Any other value (or unset) uses numba when available.
"""

import os

BACKEND_ENV = "QWTOPO_BACKEND"

_requested = os.environ.get(BACKEND_ENV, "numba").strip().lower()

try:
    import numba as _nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _nb = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _requested != "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return _nb.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
