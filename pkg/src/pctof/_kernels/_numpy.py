"""Pure-numpy implementations of the hot kernels.

Every function here has a twin in ``_numba`` with the same signature and
the same floating-point recipe, so the two backends agree to a few ulp.
"""
import math

import numpy as np

TWO_OVER_SQRTPI = 2.0 / math.sqrt(math.pi)
SQRTPI = math.sqrt(math.pi)
TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi

# series below the split, continued fraction above, saturate past 6.5
ERF_SPLIT = 2.5
ERF_SATURATE = 6.5
# erfc underflows to zero (even as a subnormal) beyond this argument
ERFC_UNDERFLOW = 27.5
ERF_SERIES_TERMS = 48
ERF_CF_TERMS = 40
BISECTION_STEPS = 64


def erf_array(x):
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    xs = np.minimum(ax, ERF_SPLIT)
    x2 = xs * xs
    t = np.ones_like(xs)
    s = np.ones_like(xs)
    for n in range(1, ERF_SERIES_TERMS):
        t = t * (2.0 * x2 / (2 * n + 1))
        s = s + t
    series = TWO_OVER_SQRTPI * xs * np.exp(-x2) * s

    xc = np.clip(ax, ERF_SPLIT, ERF_SATURATE)
    f = xc.copy()
    for n in range(ERF_CF_TERMS, 0, -1):
        f = xc + (n * 0.5) / f
    tail = 1.0 - np.exp(-xc * xc) / (SQRTPI * f)

    r = np.where(ax <= ERF_SPLIT, series, np.where(ax >= ERF_SATURATE, 1.0, tail))
    return np.where(x < 0, -r, r)


def erfc_array(x):
    """Complementary error function, relative-accurate in the upper tail."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    small = 1.0 - erf_array(np.minimum(ax, ERF_SPLIT))
    xc = np.clip(ax, ERF_SPLIT, ERFC_UNDERFLOW)
    f = xc.copy()
    for n in range(ERF_CF_TERMS, 0, -1):
        f = xc + (n * 0.5) / f
    large = np.exp(-xc * xc) / (SQRTPI * f)
    r = np.where(ax <= ERF_SPLIT, small, np.where(ax >= ERFC_UNDERFLOW, 0.0, large))
    return np.where(x < 0, 2.0 - r, r)


def erf_diff(p, q):
    """erf(q) - erf(p) for p <= q without cancellation in the tails."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    upper = erfc_array(np.maximum(p, 0.0)) - erfc_array(np.maximum(q, 0.0))
    lower = erfc_array(np.maximum(-q, 0.0)) - erfc_array(np.maximum(-p, 0.0))
    mixed = erf_array(q) - erf_array(p)
    return np.where(p >= 0.0, upper, np.where(q <= 0.0, lower, mixed))


def wrap_phase(x):
    x = np.asarray(x, dtype=np.float64)
    return x - TWO_PI * np.floor((x + math.pi) / TWO_PI)


def pulse_correlation(x, sigma, gain):
    """gain * integral of exp(-u^2/2sigma^2) over the periodic gate, x = phase - tap shift.

    The gate copies of the two neighbouring periods are included so the
    result stays relative-accurate far out in the tails.
    """
    w = wrap_phase(x)
    sa = 1.0 / (math.sqrt(2.0) * sigma)
    out = np.zeros_like(w)
    for n in (-1, 0, 1):
        y = w + n * TWO_PI
        out = out + erf_diff(sa * (y - HALF_PI), sa * (y + HALF_PI))
    return gain * (SQRTPI / (2.0 * sa)) * out


def pulse_slope(x, sigma, gain):
    w = wrap_phase(x)
    a = 1.0 / (2.0 * sigma * sigma)
    out = np.zeros_like(w)
    for n in (-1, 0, 1):
        u = w + n * TWO_PI + HALF_PI
        v = w + n * TWO_PI - HALF_PI
        out = out + (np.exp(-a * u * u) - np.exp(-a * v * v))
    return gain * out


def pava_rows(y, w=None):
    """Least-squares non-decreasing fit of every row of ``y``."""
    y = np.asarray(y, dtype=np.float64)
    out = np.empty_like(y)
    if w is None:
        w = np.ones(y.shape[1])
    w = np.asarray(w, dtype=np.float64)
    for r in range(y.shape[0]):
        out[r] = _pava_one(y[r], w)
    return out


def _pava_one(y, w):
    n = y.shape[0]
    means = [0.0] * n
    weights = [0.0] * n
    sizes = [0] * n
    k = -1
    for i in range(n):
        k += 1
        means[k] = y[i]
        weights[k] = w[i]
        sizes[k] = 1
        while k > 0 and means[k - 1] > means[k]:
            wt = weights[k - 1] + weights[k]
            means[k - 1] = (weights[k - 1] * means[k - 1] + weights[k] * means[k]) / wt
            weights[k - 1] = wt
            sizes[k - 1] += sizes[k]
            k -= 1
    out = np.empty(n)
    pos = 0
    for b in range(k + 1):
        out[pos:pos + sizes[b]] = means[b]
        pos += sizes[b]
    return out


def _cubic(xs, y, d, idx, x):
    x0 = xs[idx]
    h = xs[idx + 1] - x0
    t = (x - x0) / h
    t2 = t * t
    t3 = t2 * t
    rows = np.arange(y.shape[0])
    return ((2.0 * t3 - 3.0 * t2 + 1.0) * y[rows, idx] + (t3 - 2.0 * t2 + t) * h * d[rows, idx]
            + (3.0 * t2 - 2.0 * t3) * y[rows, idx + 1] + (t3 - t2) * h * d[rows, idx + 1])


def invert_rows(xs, y, d, psi):
    """Per row, the abscissa where the Hermite cubic (xs, y, d) equals psi.

    Rows must be non-decreasing in ``y``; NaN marks psi outside [y[0], y[-1]].
    """
    xs = np.asarray(xs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    ok = (psi >= y[:, 0]) & (psi <= y[:, -1])
    p = np.where(ok, psi, y[:, 0])
    idx = np.sum(y[:, 1:-1] <= p[:, None], axis=1)
    lo = xs[idx].copy()
    hi = xs[idx + 1].copy()
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        above = _cubic(xs, y, d, idx, mid) > p
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    out = 0.5 * (lo + hi)
    return np.where(ok, out, np.nan)
