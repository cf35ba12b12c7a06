"""Kernel backend selection.

Hot kernels are compiled with numba when it is importable and not disabled.
Set ``MSN_DISABLE_NUMBA=1`` (or ``MSN_BACKEND=numpy``) to force the
pure-numpy fallback path.
"""
import os

_FLAG_OFF = {"1", "true", "yes", "on"}


def _numba_requested() -> bool:
    if os.environ.get("MSN_DISABLE_NUMBA", "").strip().lower() in _FLAG_OFF:
        return False
    return os.environ.get("MSN_BACKEND", "numba").strip().lower() != "numpy"


USE_NUMBA = False
if _numba_requested():
    try:
        import numba  # noqa: F401

        USE_NUMBA = True
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"
