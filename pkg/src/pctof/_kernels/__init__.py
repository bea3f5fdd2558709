"""Kernel backend selection.

The numba backend is used when numba imports cleanly, unless the
environment variable ``PCTOF_DISABLE_NUMBA`` is set to a truthy value, in
which case the pure-numpy twins run instead.
"""
import os

from . import _numpy

_disabled = os.environ.get("PCTOF_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

if _disabled:
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is an optional accelerator
        _impl = _numpy
        BACKEND = "numpy"

erf_array = _impl.erf_array
erfc_array = _impl.erfc_array
erf_diff = _impl.erf_diff
wrap_phase = _impl.wrap_phase
pulse_correlation = _impl.pulse_correlation
pulse_slope = _impl.pulse_slope
pava_rows = _impl.pava_rows
invert_rows = _impl.invert_rows


def backends():
    """Mapping of every importable backend name to its module."""
    found = {"numpy": _numpy}
    try:
        from . import _numba
        found["numba"] = _numba
    except ImportError:  # pragma: no cover
        pass
    return found
