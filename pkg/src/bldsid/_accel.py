"""Backend selection for the hot numeric kernels.

The env var BLDSID_NUMBA controls which implementation the dispatchers in
kernels.py use:

    unset / "auto"  use numba when importable, else the numpy fallback
    "0" / "off"     force the pure-numpy fallback
    "1" / "on"      require numba (ImportError if missing)

The flag is read once at import time.
"""

from __future__ import annotations

import os

_TRUTHY = ("1", "on", "true", "yes")
_FALSY = ("0", "off", "false", "no")


def _resolve() -> bool:
    raw = os.environ.get("BLDSID_NUMBA", "auto").strip().lower()
    if raw in _FALSY:
        return False
    if raw in _TRUTHY:
        import numba  # noqa: F401  fail loudly if explicitly requested

        return True
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _resolve()
BACKEND = "numba" if NUMBA_ENABLED else "numpy"


def jit_if_enabled(func):
    """Wrap ``func`` with ``numba.njit(cache=True)`` when the backend is numba."""
    if NUMBA_ENABLED:
        from numba import njit

        return njit(cache=True)(func)
    return func
