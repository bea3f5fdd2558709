import math

import numpy as np

from .. import _kernels
from ..errors import DomainError


def erf_eval(x):
    """Error function accurate to 1e-12 absolute, exactly odd.

    Accepts a scalar or an array; scalars come back as Python floats.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("erf_eval requires finite input")
    out = _kernels.erf_array(arr)
    if arr.ndim == 0:
        return float(out)
    return out


def erfc_eval(x):
    """Complementary error function with relative accuracy in the upper tail."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("erfc_eval requires finite input")
    out = _kernels.erfc_array(arr)
    if arr.ndim == 0:
        return float(out)
    return out


def gaussian_fwhm_factor():
    return 2.0 * math.sqrt(2.0 * math.log(2.0))
