"""Numeric inner loops: piecewise-cubic evaluation and shift scans.

Two interchangeable implementations live here.  ``_numba`` carries jitted
versions of the hot loops; ``_numpy`` is a vectorized pure-numpy twin used
as the fallback.  Selection happens once at import time:

* ``ADSB_UL_NO_NUMBA=1`` (or ``true``/``yes``/``on``) forces the numpy path;
* otherwise numba is used when importable, numpy when not.

``BACKEND`` names the active implementation.  Both produce the same values
up to floating-point summation order.
"""

from __future__ import annotations

import os

from . import _numpy as numpy_impl

__all__ = ["BACKEND", "ppoly_eval", "shift_scan", "numpy_impl"]


def _numba_disabled() -> bool:
    flag = os.environ.get("ADSB_UL_NO_NUMBA", "").strip().lower()
    return flag in {"1", "true", "yes", "on"}


if _numba_disabled():
    _impl = numpy_impl
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl  # noqa: F401

        BACKEND = "numba"
    except ImportError:
        _impl = numpy_impl
        BACKEND = "numpy"

ppoly_eval = _impl.ppoly_eval
shift_scan = _impl.shift_scan
