from dataclasses import dataclass

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True, eq=False)
class SampledCurve:
    """Raw-fraction samples taken at strictly increasing phases."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ys = np.asarray(self.ys, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise DomainError("xs and ys must be 1-D arrays of equal length")
        if xs.size < 4:
            raise DomainError("a sampled curve needs at least 4 samples")
        if not np.all(np.diff(xs) > 0):
            raise DomainError("xs must be strictly increasing")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self):
        return self.xs.size
