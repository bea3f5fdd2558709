import numpy as np

from .. import _kernels
from ..errors import DomainError
from .curves import SampledCurve


def isotonic_fit(curve):
    """Least-squares non-decreasing fit (pool adjacent violators)."""
    if len(curve.xs) < 4:
        raise DomainError("isotonic_fit needs at least 4 samples")
    ys = _kernels.pava_rows(np.asarray(curve.ys, dtype=np.float64)[None, :])[0]
    return SampledCurve(curve.xs, ys)


def isotonic_rows(y, w=None):
    """Row-wise isotonic regression of a 2-D array."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise DomainError("isotonic_rows expects a 2-D array")
    return _kernels.pava_rows(y, w)
