"""Numerical kernels: error function, quadrature oracle, isotonic and spline fits."""
from .curves import SampledCurve
from .erf import erf_eval, erfc_eval
from .isotonic import isotonic_fit, isotonic_rows
from .quadrature import integrate, quadrature_correlate
from .spline import (
    MonotoneResponse,
    fit_monotone_response,
    fit_monotone_rows,
    hermite_slopes,
    invert_monotone,
    natural_moments,
    smooth_rows,
)

__all__ = [
    "SampledCurve",
    "MonotoneResponse",
    "erf_eval",
    "erfc_eval",
    "integrate",
    "quadrature_correlate",
    "isotonic_fit",
    "isotonic_rows",
    "fit_monotone_response",
    "fit_monotone_rows",
    "invert_monotone",
    "natural_moments",
    "hermite_slopes",
    "smooth_rows",
]
