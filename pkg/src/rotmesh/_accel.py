"""Switch between compiled and interpreted kernels.

Hot loops live in plain functions decorated with :func:`jit`. By default the
decorator is numba's ``njit(cache=True)``; setting ``RSR_NUMBA=0`` (or
``false`` / ``off``) in the environment before import turns it into a no-op
so the identical source runs as ordinary Python. That path is slow but easy
to step through and useful for isolating compiler issues.

The flag is read once at import time; flip it between runs, not mid-process.
"""

from __future__ import annotations

import os


def _flag_enabled() -> bool:
    raw = os.environ.get("RSR_NUMBA", "1").strip().lower()
    return raw not in ("0", "false", "off", "no")


NUMBA_ENABLED = False
if _flag_enabled():
    try:
        import numba as _numba

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


if NUMBA_ENABLED:

    def jit(func=None, **options):
        """numba.njit with cache=True folded in."""
        options.setdefault("cache", True)
        if func is None:
            return lambda f: _numba.njit(**options)(f)
        return _numba.njit(**options)(func)

else:

    def jit(func=None, **options):
        """Identity decorator; kernels run as plain Python."""
        if func is None:
            return lambda f: f
        return func
