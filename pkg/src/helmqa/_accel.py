"""Numba switch for the hot kernels.

Set ``HELMQA_DISABLE_NUMBA=1`` (before import) to force the pure-numpy
implementations. Results are identical between the two paths; only speed
differs.
"""
import os

_FLAG = os.environ.get("HELMQA_DISABLE_NUMBA", "").strip().lower()

try:
    import numba  # noqa: F401
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator.

    Kernels decorated with this are always importable; the numpy fallbacks
    never call them when ``USE_NUMBA`` is false.
    """
    if _HAVE_NUMBA:
        import numba

        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend():
    return "numba" if USE_NUMBA else "numpy"
