"""Adaptive Gauss-Kronrod quadrature used as an oracle for closed forms."""
import math

import numpy as np

from ..errors import IntegrationError

# Kronrod 15-point abscissae/weights and the embedded 7-point Gauss weights
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_WEIGHTS_K = np.concatenate([_WK[:-1], _WK[::-1]])
_WEIGHTS_G = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (x_1, x_3, x_5, 0, ...)
_WEIGHTS_G[[1, 3, 5]] = _WG[:3]
_WEIGHTS_G[7] = _WG[3]
_WEIGHTS_G[[9, 11, 13]] = _WG[2::-1]

MAX_PANELS = 2 ** 22


def _gk15(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * _NODES[None, :]
    vals = np.asarray(f(pts), dtype=np.float64)
    k = half * (vals @ _WEIGHTS_K)
    g = half * (vals @ _WEIGHTS_G)
    return k, np.abs(k - g)


def integrate(f, a, b, rtol=1e-9, atol=0.0, points=(), max_panels=MAX_PANELS):
    """Integrate a vectorised ``f`` over [a, b] by adaptive interval halving.

    Panels are split until the summed Kronrod-minus-Gauss error estimate
    drops below ``max(rtol * |I|, atol)``.  ``points`` seeds the initial
    panel boundaries, e.g. at kinks or narrow peaks of the integrand.
    """
    if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
        raise IntegrationError(f"invalid integration interval [{a}, {b}]")
    cuts = sorted({a, b, *(p for p in points if a < p < b)})
    lo = np.array(cuts[:-1], dtype=np.float64)
    hi = np.array(cuts[1:], dtype=np.float64)
    done_val = 0.0
    done_err = 0.0
    length = b - a
    while True:
        val, err = _gk15(f, lo, hi)
        total = done_val + val.sum()
        tol = max(rtol * abs(total), atol)
        if done_err + err.sum() <= tol:
            return float(total)
        # a panel is final once its error fits its share of the budget
        keep = err <= 0.5 * tol * (hi - lo) / length
        done_val += val[keep].sum()
        done_err += err[keep].sum()
        lo, hi = lo[~keep], hi[~keep]
        mid = 0.5 * (lo + hi)
        if not np.all((mid > lo) & (mid < hi)):
            raise IntegrationError("panel width reached floating-point resolution")
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        if lo.size > max_panels:
            raise IntegrationError(
                f"no convergence to rtol={rtol:g} within {max_panels} panels "
                f"(estimate {total:.17g}, error {done_err + err.sum():.3g})")


def quadrature_correlate(modulation, demodulation, phase_depth, tap_shift, omega, rtol=1e-9):
    """Correlation of one tap by direct integration over one period.

    Integrates ``i(phi - phase_depth) * s(phi - tap_shift)`` over a period
    and divides by ``omega``.  Both signal objects only need an
    ``evaluate(phi)`` method and may offer ``features()`` listing phases
    (relative to their own origin) where the integrand is sharp.
    """
    centre = float(tap_shift)
    a, b = centre - math.pi, centre + math.pi
    pts = []
    for sig, shift in ((modulation, phase_depth), (demodulation, tap_shift)):
        for p in getattr(sig, "features", lambda: ())():
            q = p + shift
            q = q - 2 * math.pi * math.floor((q - a) / (2 * math.pi))
            pts.append(q)
            pts.append(q - 2 * math.pi)
            pts.append(q + 2 * math.pi)

    def integrand(phi):
        return modulation.evaluate(phi - phase_depth) * demodulation.evaluate(phi - tap_shift)

    return integrate(integrand, a, b, rtol=rtol, points=pts) / omega
