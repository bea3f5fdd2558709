"""Monotone cubic response curves for lookup inversion.

A response is a cubic Hermite curve through fitted values ``ys`` at knots
``xs`` with knot slopes ``ds``.  The slopes are those of the natural cubic
spline through ``ys``, limited where needed so every interval stays
monotone (Fritsch-Carlson), which makes them a function of ``ys`` alone.  Fitting
runs on many curves sharing one abscissa grid at once (one curve per
sensor pixel), so the smoother is diagonalised once per grid.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import _kernels
from ..errors import DegenerateEdgeError, DomainError, FitError, OutOfSensitiveRangeError
from .curves import SampledCurve

MAX_ESCALATIONS = 10
GCV_GRID = 240


def natural_moments(xs, ys):
    """Second derivatives at the knots of the natural cubic through ``ys``.

    ``ys`` may be 1-D or 2-D (one curve per row).  Solved with the Thomas
    algorithm so each row's result is independent of its batch mates.
    """
    xs = np.asarray(xs, dtype=np.float64)
    y = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    n = xs.size
    h = np.diff(xs)
    m = np.zeros_like(y)
    if n < 3:
        return m.reshape(np.shape(ys))
    rhs = 6.0 * ((y[:, 2:] - y[:, 1:-1]) / h[1:] - (y[:, 1:-1] - y[:, :-2]) / h[:-1])
    diag = 2.0 * (h[:-1] + h[1:])
    off = h[1:-1]
    k = n - 2
    c = np.empty(k)
    d = np.empty_like(rhs)
    c[0] = off[0] / diag[0] if k > 1 else 0.0
    d[:, 0] = rhs[:, 0] / diag[0]
    for i in range(1, k):
        denom = diag[i] - off[i - 1] * c[i - 1]
        if i < k - 1:
            c[i] = off[i] / denom
        d[:, i] = (rhs[:, i] - off[i - 1] * d[:, i - 1]) / denom
    m[:, k] = d[:, k - 1]
    for i in range(k - 2, -1, -1):
        m[:, i + 1] = d[:, i] - c[i] * m[:, i + 2]
    return m.reshape(np.shape(ys))


def _segment(xs, x):
    return np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)


def hermite_slopes(xs, ys):
    """Monotone knot slopes for non-decreasing rows of ``ys``."""
    xs = np.asarray(xs, dtype=np.float64)
    y = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    h = np.diff(xs)
    delta = np.diff(y, axis=1) / h
    m = natural_moments(xs, y)
    d = np.empty_like(y)
    d[:, :-1] = delta - h * (2.0 * m[:, :-1] + m[:, 1:]) / 6.0
    d[:, -1] = delta[:, -1] + h[-1] * (m[:, -2] + 2.0 * m[:, -1]) / 6.0
    d = np.clip(d, 0.0, None)
    flat = delta <= 0.0
    d[:, :-1][flat] = 0.0
    d[:, 1:][flat] = 0.0
    # keep (alpha, beta) inside the radius-3 disc, a sufficient monotonicity region
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(flat, 0.0, (d[:, :-1] ** 2 + d[:, 1:] ** 2) / np.where(flat, 1.0, delta) ** 2)
    tau = np.where(r2 > 9.0, 3.0 / np.sqrt(np.where(r2 > 9.0, r2, 1.0)), 1.0)
    shrink = np.ones_like(d)
    shrink[:, :-1] = tau
    shrink[:, 1:] = np.minimum(shrink[:, 1:], tau)
    return (d * shrink).reshape(np.shape(ys))


def evaluate_rows(xs, ys, ds, x):
    """Evaluate every row's curve at the per-row abscissa ``x``."""
    ys = np.atleast_2d(ys)
    ds = np.atleast_2d(ds)
    x = np.broadcast_to(np.asarray(x, dtype=np.float64), (ys.shape[0],))
    i = _segment(xs, x)
    rows = np.arange(ys.shape[0])
    h = xs[i + 1] - xs[i]
    t = (x - xs[i]) / h
    t2 = t * t
    t3 = t2 * t
    return ((2.0 * t3 - 3.0 * t2 + 1.0) * ys[rows, i] + (t3 - 2.0 * t2 + t) * h * ds[rows, i]
            + (3.0 * t2 - 2.0 * t3) * ys[rows, i + 1] + (t3 - t2) * h * ds[rows, i + 1])


def slope_checks(xs, ys, ds):
    """Curve derivative at every knot (both sides) and every midpoint.

    Returns an array of shape (rows, 3, n-1).
    """
    ys = np.atleast_2d(ys)
    ds = np.atleast_2d(ds)
    dy = np.diff(ys, axis=1) / np.diff(xs)
    d0, d1 = ds[:, :-1], ds[:, 1:]
    return np.stack([d0, d1, 1.5 * dy - 0.25 * (d0 + d1)], axis=1)


@lru_cache(maxsize=4)
def _reinsch_basis(key):
    t = np.frombuffer(key, dtype=np.float64)
    n = t.size
    h = np.diff(t)
    q = np.zeros((n, n - 2))
    j = np.arange(n - 2)
    q[j, j] = 1.0 / h[:-1]
    q[j + 1, j] = -1.0 / h[:-1] - 1.0 / h[1:]
    q[j + 2, j] = 1.0 / h[1:]
    r = np.diag((h[:-1] + h[1:]) / 3.0)
    r[j[:-1], j[:-1] + 1] = h[1:-1] / 6.0
    r[j[:-1] + 1, j[:-1]] = h[1:-1] / 6.0
    k = q @ np.linalg.solve(r, q.T)
    k = 0.5 * (k + k.T)
    d, u = np.linalg.eigh(k)
    d = np.clip(d, 0.0, None)
    return d, u


def _normalised(xs):
    xs = np.asarray(xs, dtype=np.float64)
    return (xs - xs[0]) / (xs[-1] - xs[0])


def smooth_rows(xs, y, lam):
    """Cubic smoothing-spline fitted values for each row of ``y``.

    Minimises ``sum (y - f)^2 + lam * integral f''^2`` with the abscissa
    rescaled to [0, 1]; ``lam`` is a scalar or one value per row.
    """
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (y.shape[0],))
    out = y.copy()
    pos = lam > 0
    if np.any(pos):
        d, u = _reinsch_basis(_normalised(xs).tobytes())
        z = y[pos] @ u
        out[pos] = (z / (1.0 + lam[pos, None] * d[None, :])) @ u.T
    return out


def gcv_lambda_rows(xs, y):
    """Per-row smoothing parameter minimising generalised cross-validation."""
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    n = y.shape[1]
    d, u = _reinsch_basis(_normalised(xs).tobytes())
    nz = d[d > 0]
    grid = np.logspace(np.log10(1e-6 / nz.max()), np.log10(1e6 / nz.min()), GCV_GRID)
    shrink = grid[:, None] * d[None, :] / (1.0 + grid[:, None] * d[None, :])
    trace = np.sum(1.0 / (1.0 + grid[:, None] * d[None, :]), axis=1)
    z2 = (y @ u) ** 2
    resid = z2 @ (shrink ** 2).T
    score = n * resid / (n - trace[None, :]) ** 2
    return grid[np.argmin(score, axis=1)]


def _min_lambda(xs):
    d, _ = _reinsch_basis(_normalised(xs).tobytes())
    return 1e-6 / d.max()


@dataclass(frozen=True, eq=False)
class MonotoneResponse:
    """Non-decreasing cubic Hermite curve mapping phase to raw fraction."""

    xs: np.ndarray
    ys: np.ndarray
    ds: np.ndarray
    smoothing: float = 0.0

    @property
    def domain(self):
        return float(self.xs[0]), float(self.xs[-1])

    @property
    def range(self):
        return float(self.ys[0]), float(self.ys[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        flat = x.ravel()
        out = evaluate_rows(self.xs, np.broadcast_to(self.ys, (flat.size, self.ys.size)),
                            np.broadcast_to(self.ds, (flat.size, self.ds.size)), flat)
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    def slopes(self):
        return slope_checks(self.xs, self.ys, self.ds)[0]

    def invert(self, psi):
        lo, hi = self.range
        if not (lo <= psi <= hi):
            raise OutOfSensitiveRangeError(
                f"raw fraction {psi!r} outside response range [{lo!r}, {hi!r}]")
        return float(_kernels.invert_rows(self.xs, self.ys[None, :], self.ds[None, :],
                                          np.array([psi], dtype=np.float64))[0])


def fit_monotone_rows(xs, y, smoothing=None):
    """Fit one monotone response per row of ``y`` on the shared grid ``xs``.

    Returns ``(ys_fit, ds, lam, status)``.  ``status`` is 0 for success,
    1 for a degenerate (flat) edge and 2 when monotonicity could not be
    reached within the escalation budget; failed rows are NaN.
    """
    xs = np.asarray(xs, dtype=np.float64)
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    rows = y.shape[0]
    iso = _kernels.pava_rows(y)
    span = iso[:, -1] - iso[:, 0]
    scale = np.maximum(np.max(np.abs(iso), axis=1), 1.0)
    status = np.where(span > 1e-12 * scale, 0, 1)
    status[~np.all(np.isfinite(y), axis=1)] = 1

    if smoothing is None:
        lam = np.zeros(rows)
        live = status == 0
        if np.any(live):
            # cross-validate on the raw samples; the isotonic blocks would favour interpolation
            lam[live] = gcv_lambda_rows(xs, y[live])
    else:
        if smoothing < 0:
            raise DomainError("smoothing must be non-negative")
        lam = np.full(rows, float(smoothing))

    fit = np.full_like(y, np.nan)
    ds = np.full_like(y, np.nan)
    todo = np.flatnonzero(status == 0)
    floor = _min_lambda(xs)
    for attempt in range(MAX_ESCALATIONS + 1):
        if todo.size == 0:
            break
        f = _kernels.pava_rows(smooth_rows(xs, iso[todo], lam[todo]))
        m = hermite_slopes(xs, f)
        good = np.all(slope_checks(xs, f, m) >= 0.0, axis=(1, 2)) & np.all(np.isfinite(m), axis=1)
        fit[todo[good]] = f[good]
        ds[todo[good]] = m[good]
        todo = todo[~good]
        if attempt < MAX_ESCALATIONS:
            lam[todo] = np.maximum(2.0 * lam[todo], floor)
    status[todo] = 2
    return fit, ds, lam, status


def fit_monotone_response(curve, smoothing=None):
    """Isotonic pre-pass followed by a monotone cubic smoothing spline.

    ``smoothing`` is the penalty weight on the [0, 1]-rescaled abscissa;
    ``None`` selects it by generalised cross-validation on the raw samples.
    Smoothed values are projected back onto non-decreasing sequences and
    joined by a slope-limited Hermite cubic.  Should the derivative still
    be negative at a knot or midpoint, the weight is doubled (at most ten
    times) and the fit repeated.
    """
    if not isinstance(curve, SampledCurve):
        raise DomainError("fit_monotone_response expects a SampledCurve")
    fit, ds, lam, status = fit_monotone_rows(curve.xs, curve.ys[None, :], smoothing)
    if status[0] == 1:
        raise DegenerateEdgeError("curve has no rising edge (isotonic fit is flat)")
    if status[0] == 2:
        raise FitError(f"no monotone fit after {MAX_ESCALATIONS} smoothing escalations")
    return MonotoneResponse(curve.xs.copy(), fit[0], ds[0], float(lam[0]))


def invert_monotone(response, psi):
    """Phase at which ``response`` reaches raw fraction ``psi`` (bisection)."""
    return response.invert(float(psi))
