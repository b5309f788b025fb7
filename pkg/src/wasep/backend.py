"""Numba/NumPy backend selection for the hot kernels.

The event-driven lattice simulation and the Burgers time stepper are the
only runtime-dominant loops in the package.  They are compiled with numba
by default; setting the environment variable ``WASEP_DISABLE_NUMBA=1``
(or numba being unimportable) selects the pure NumPy/Python fallback
implementations instead.  Both paths are exercised by the test suite and
compared by ``benchmarks/benchmark_backends.py``.
"""

import os

_DISABLED = os.environ.get("WASEP_DISABLE_NUMBA", "0") not in ("", "0", "false", "False")

if not _DISABLED:
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def use_numba() -> bool:
    """True when the compiled kernel path is active."""
    return NUMBA_ENABLED


def maybe_njit(func=None, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        if func is None:
            return _njit(**kwargs)
        return _njit(**kwargs)(func)
    if func is None:
        return lambda f: f
    return func
