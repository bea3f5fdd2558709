"""numba-compiled twins of the kernels in ``_numpy``."""
import math

import numpy as np
from numba import njit

from ._numpy import (
    BISECTION_STEPS,
    ERF_CF_TERMS,
    ERF_SATURATE,
    ERF_SERIES_TERMS,
    ERF_SPLIT,
    ERFC_UNDERFLOW,
    HALF_PI,
    SQRTPI,
    TWO_OVER_SQRTPI,
    TWO_PI,
)


@njit(cache=True)
def erf_scalar(x):
    ax = abs(x)
    if ax <= ERF_SPLIT:
        x2 = ax * ax
        t = 1.0
        s = 1.0
        for n in range(1, ERF_SERIES_TERMS):
            t = t * (2.0 * x2 / (2 * n + 1))
            s = s + t
        r = TWO_OVER_SQRTPI * ax * math.exp(-x2) * s
    elif ax >= ERF_SATURATE:
        r = 1.0
    else:
        f = ax
        for n in range(ERF_CF_TERMS, 0, -1):
            f = ax + (n * 0.5) / f
        r = 1.0 - math.exp(-ax * ax) / (SQRTPI * f)
    return -r if x < 0 else r


@njit(cache=True)
def erfc_scalar(x):
    ax = abs(x)
    if ax <= ERF_SPLIT:
        r = 1.0 - erf_scalar(ax)
    elif ax >= ERFC_UNDERFLOW:
        r = 0.0
    else:
        f = ax
        for n in range(ERF_CF_TERMS, 0, -1):
            f = ax + (n * 0.5) / f
        r = math.exp(-ax * ax) / (SQRTPI * f)
    return 2.0 - r if x < 0 else r


@njit(cache=True)
def erf_diff_scalar(p, q):
    if p >= 0.0:
        return erfc_scalar(p) - erfc_scalar(q)
    if q <= 0.0:
        return erfc_scalar(-q) - erfc_scalar(-p)
    return erf_scalar(q) - erf_scalar(p)


@njit(cache=True)
def _erf_flat(x):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = erf_scalar(x[i])
    return out


@njit(cache=True)
def _erfc_flat(x):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = erfc_scalar(x[i])
    return out


@njit(cache=True)
def _erf_diff_flat(p, q):
    out = np.empty_like(p)
    for i in range(p.shape[0]):
        out[i] = erf_diff_scalar(p[i], q[i])
    return out


def erf_array(x):
    x = np.asarray(x, dtype=np.float64)
    return _erf_flat(np.ascontiguousarray(x).ravel()).reshape(x.shape)


def erfc_array(x):
    x = np.asarray(x, dtype=np.float64)
    return _erfc_flat(np.ascontiguousarray(x).ravel()).reshape(x.shape)


def erf_diff(p, q):
    p, q = np.broadcast_arrays(np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64))
    return _erf_diff_flat(np.ascontiguousarray(p).ravel(), np.ascontiguousarray(q).ravel()).reshape(p.shape)


@njit(cache=True)
def _wrap(x):
    return x - TWO_PI * math.floor((x + math.pi) / TWO_PI)


def wrap_phase(x):
    x = np.asarray(x, dtype=np.float64)
    return x - TWO_PI * np.floor((x + math.pi) / TWO_PI)


@njit(cache=True)
def _pulse_corr_flat(x, sigma, gain):
    sa = 1.0 / (math.sqrt(2.0) * sigma)
    pref = gain * (SQRTPI / (2.0 * sa))
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        w = _wrap(x[i])
        acc = 0.0
        for n in range(-1, 2):
            y = w + n * TWO_PI
            acc = acc + erf_diff_scalar(sa * (y - HALF_PI), sa * (y + HALF_PI))
        out[i] = pref * acc
    return out


@njit(cache=True)
def _pulse_slope_flat(x, sigma, gain):
    a = 1.0 / (2.0 * sigma * sigma)
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        w = _wrap(x[i])
        acc = 0.0
        for n in range(-1, 2):
            u = w + n * TWO_PI + HALF_PI
            v = w + n * TWO_PI - HALF_PI
            acc = acc + (math.exp(-a * u * u) - math.exp(-a * v * v))
        out[i] = gain * acc
    return out


def pulse_correlation(x, sigma, gain):
    x = np.asarray(x, dtype=np.float64)
    return _pulse_corr_flat(np.ascontiguousarray(x).ravel(), float(sigma), float(gain)).reshape(x.shape)


def pulse_slope(x, sigma, gain):
    x = np.asarray(x, dtype=np.float64)
    return _pulse_slope_flat(np.ascontiguousarray(x).ravel(), float(sigma), float(gain)).reshape(x.shape)


@njit(cache=True)
def _pava_kernel(y, w, out):
    nrow, n = y.shape
    means = np.empty(n)
    weights = np.empty(n)
    sizes = np.empty(n, dtype=np.int64)
    for r in range(nrow):
        k = -1
        for i in range(n):
            k += 1
            means[k] = y[r, i]
            weights[k] = w[i]
            sizes[k] = 1
            while k > 0 and means[k - 1] > means[k]:
                wt = weights[k - 1] + weights[k]
                means[k - 1] = (weights[k - 1] * means[k - 1] + weights[k] * means[k]) / wt
                weights[k - 1] = wt
                sizes[k - 1] += sizes[k]
                k -= 1
        pos = 0
        for b in range(k + 1):
            for j in range(sizes[b]):
                out[r, pos + j] = means[b]
            pos += sizes[b]


def pava_rows(y, w=None):
    y = np.ascontiguousarray(y, dtype=np.float64)
    if w is None:
        w = np.ones(y.shape[1])
    out = np.empty_like(y)
    _pava_kernel(y, np.ascontiguousarray(w, dtype=np.float64), out)
    return out


@njit(cache=True)
def _invert_kernel(xs, y, d, psi, out):
    nrow, n = y.shape
    for r in range(nrow):
        p = psi[r]
        if not (p >= y[r, 0] and p <= y[r, n - 1]):
            out[r] = np.nan
            continue
        # count of interior knots at or below p, as in the numpy twin
        idx = 0
        for j in range(1, n - 1):
            if y[r, j] <= p:
                idx += 1
        lo = xs[idx]
        hi = xs[idx + 1]
        x0 = xs[idx]
        x1 = xs[idx + 1]
        h = x1 - x0
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            t = (mid - x0) / h
            t2 = t * t
            t3 = t2 * t
            s = ((2.0 * t3 - 3.0 * t2 + 1.0) * y[r, idx] + (t3 - 2.0 * t2 + t) * h * d[r, idx]
                 + (3.0 * t2 - 2.0 * t3) * y[r, idx + 1] + (t3 - t2) * h * d[r, idx + 1])
            if s > p:
                hi = mid
            else:
                lo = mid
        out[r] = 0.5 * (lo + hi)


def invert_rows(xs, y, d, psi):
    y = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty(y.shape[0])
    _invert_kernel(np.ascontiguousarray(xs, dtype=np.float64), y,
                   np.ascontiguousarray(d, dtype=np.float64),
                   np.ascontiguousarray(psi, dtype=np.float64), out)
    return out
