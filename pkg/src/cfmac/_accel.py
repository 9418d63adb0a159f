"""Backend selection for the numeric kernels.

Set ``CFMAC_DISABLE_NUMBA=1`` to force the pure-numpy path. Numba is also
skipped silently when it cannot be imported.
"""

import os

_FLAG = os.environ.get("CFMAC_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG not in ("", "0", "false", "no")

try:
    from numba import njit as _njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not DISABLED_BY_ENV


def jit(func):
    """Compile ``func`` with numba if available, else return it unchanged.

    The returned object is only ever used when ``USE_NUMBA`` is true, but
    compiling lazily keeps import cheap either way.
    """
    if not NUMBA_AVAILABLE:
        return func
    return _njit(cache=True, nogil=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
