"""Per-pixel calibration of the pulsed raw-fraction response.

Three stages against a flat target at a known depth:

1. a coarse sweep of the global shift over a full period locates, for
   every pixel, the two plateaus of the raw fraction, their midpoint (the
   zero equivalent) and the sensitive interval around the rising edge;
2. a fine sweep over the union of those intervals feeds a monotone
   smoothing-spline fit per pixel;
3. the phase at which each pixel's fit crosses its zero equivalent gives
   the per-pixel phase-correction mask (deviation from the median).

The rising edge used is the one where the denominator ``I1 - I3`` is
positive; the other rising edge of the raw fraction sits pi away.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .acquisition import STREAM_COARSE, STREAM_FINE, raw_fraction, render_taps
from .errors import (
    CalibrationError,
    DegenerateSweepError,
    DomainError,
    OutOfSensitiveRangeError,
)
from .numerics.spline import MonotoneResponse, fit_monotone_rows, hermite_slopes
from .scene import DEFAULT_RESOLUTION, SceneFrame, make_plane
from .signal_model import TWO_PI, doi_to_global_shift, phase_from_depth, sensitive_range

COARSE_STEPS = 512
MIN_COARSE_STEPS = 16
FINE_STEP = TWO_PI / 2 ** 14
PLATEAU_BAND = 0.10
MIN_BAND_SHARE = 0.10
DEPARTURE = 0.02
POLE_GUARD = 0.9
# the denominator sits on a plateau for most of a period; this quantile of
# |den| tracks that plateau without being dragged up by noise outliers
POLE_REFERENCE_QUANTILE = 0.75
# looser guard for the edge walk, which only has to stop short of a pole
WALK_GUARD = 0.5
SMOOTH_WINDOW = 5
MAX_INVALID_FRACTION = 0.20
FIT_CHUNK = 2048
MARGIN_STEPS = 2


@dataclass(frozen=True, eq=False)
class SweepRecord:
    """Raw fractions over a list of global shifts.

    ``psi`` and ``denominator`` have shape (n, height, width).  Without a
    denominator every sample counts as lying on the positive-denominator
    branch.  ``periodic`` marks an evenly spaced sweep over a full period.
    """

    theta_g: np.ndarray
    psi: np.ndarray
    denominator: np.ndarray = None
    periodic: bool = False

    def __post_init__(self):
        th = np.asarray(self.theta_g, dtype=np.float64)
        psi = np.asarray(self.psi, dtype=np.float64)
        if psi.ndim == 1:
            psi = psi[:, None, None]
        if th.ndim != 1 or psi.shape[0] != th.size:
            raise DomainError("one psi image per sweep position is required")
        if th.size > 1 and not np.all(np.diff(th) > 0):
            raise DomainError("sweep positions must be strictly increasing")
        den = self.denominator
        if den is not None:
            den = np.asarray(den).reshape(psi.shape)
        object.__setattr__(self, "theta_g", th)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "denominator", den)

    def __len__(self):
        return self.theta_g.size

    @property
    def shape(self):
        return self.psi.shape[1:]

    def rows(self):
        """(psi, denominator) with one row per pixel."""
        n = len(self)
        psi = self.psi.reshape(n, -1).T
        den = (np.ones_like(psi) if self.denominator is None
               else self.denominator.reshape(n, -1).T.astype(np.float64))
        return psi, den

    def pixel_rows(self, pixel):
        r, c = pixel
        den = None if self.denominator is None else self.denominator[:, r, c]
        return SweepRecord(self.theta_g, self.psi[:, r, c], den, self.periodic)


def _run_sweep(target, acq, thetas, stream, periodic):
    n = thetas.size
    h, w = target.depth.shape
    psi = np.empty((n, h, w))
    den = np.empty((n, h, w), dtype=np.float32)
    for k, th in enumerate(thetas):
        rf = raw_fraction(render_taps(target, acq.with_theta_g(th), frame_index=k, stream=stream))
        psi[k] = rf.psi
        den[k] = rf.denominator
    return SweepRecord(thetas, psi, den, periodic)


def coarse_sweep(target, acq, n=COARSE_STEPS):
    """Raw fraction at ``n`` evenly spaced global shifts over [0, 2*pi)."""
    if int(n) != n or n < MIN_COARSE_STEPS:
        raise DomainError(f"coarse sweep needs at least {MIN_COARSE_STEPS} steps, got {n}")
    return _run_sweep(target, acq, TWO_PI * np.arange(int(n)) / n, STREAM_COARSE, True)


def fine_sweep(target, acq, interval, step=FINE_STEP):
    """Raw fraction on ``lo, lo + step, ...`` up to ``hi`` (inclusive when on grid)."""
    lo, hi = (float(v) for v in interval)
    if not step > 0:
        raise DomainError("fine sweep step must be positive")
    if not hi > lo:
        raise DomainError("fine sweep interval must have positive width")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return _run_sweep(target, acq, lo + step * np.arange(count), STREAM_FINE, False)


# -- per-pixel estimators, vectorised over rows ----------------------------

def _usable(den, guard=POLE_GUARD):
    aden = np.abs(den)
    ref = np.quantile(aden, POLE_REFERENCE_QUANTILE, axis=1, keepdims=True)
    return aden >= guard * ref


def _nanmedian_rows(v):
    """Row medians ignoring NaN; all-NaN rows give NaN without warnings."""
    out = np.full(v.shape[0], np.nan)
    has = np.any(np.isfinite(v), axis=1)
    if np.any(has):
        out[has] = np.nanmedian(v[has], axis=1)
    return out


def plateau_rows(psi, den):
    """Decile-band medians of each row; returns ``(hi, lo, ok)``.

    Samples next to the poles of the raw fraction (where the denominator
    is below 90 % of its typical plateau magnitude) are ignored.
    """
    v = np.where(_usable(den), psi, np.nan)
    vmax = np.nanmax(v, axis=1)
    vmin = np.nanmin(v, axis=1)
    span = vmax - vmin
    band = PLATEAU_BAND * span
    hi0 = _nanmedian_rows(np.where(v >= (vmax - band)[:, None], v, np.nan))
    lo0 = _nanmedian_rows(np.where(v <= (vmin + band)[:, None], v, np.nan))
    # the bands are set by the extremes, so under noise they hold only the
    # upper tail of each plateau; re-take the medians over each half
    mid = (0.5 * (hi0 + lo0))[:, None]
    hi = _nanmedian_rows(np.where(v >= mid, v, np.nan))
    lo = _nanmedian_rows(np.where(v <= mid, v, np.nan))
    # plateaus are long flat runs; noise alone leaves only a few extremes in each band
    usable = np.sum(np.isfinite(v), axis=1)
    n_hi = np.sum(v >= (vmax - band)[:, None], axis=1)
    n_lo = np.sum(v <= (vmin + band)[:, None], axis=1)
    crowded = (n_hi >= MIN_BAND_SHARE * usable) & (n_lo >= MIN_BAND_SHARE * usable)
    floor = 1e-9 * np.maximum(1.0, np.nanmax(np.abs(v), axis=1))
    ok = np.isfinite(span) & (hi - lo > floor) & crowded
    return hi, lo, ok


def estimate_plateaus(sweep, pixel=(0, 0)):
    """Upper and lower plateau of one pixel's coarse sweep."""
    if len(sweep) < MIN_COARSE_STEPS:
        raise DomainError(f"plateau estimation needs at least {MIN_COARSE_STEPS} samples")
    psi, den = sweep.pixel_rows(pixel).rows()
    hi, lo, ok = plateau_rows(psi, den)
    if not ok[0]:
        raise DegenerateSweepError("sweep span is below the noise floor; no plateaus to estimate")
    return float(hi[0]), float(lo[0])


def zero_equivalent(plateau_hi, plateau_lo):
    """Raw-fraction level midway between the plateaus."""
    if not plateau_hi > plateau_lo:
        raise DomainError("upper plateau must exceed the lower plateau")
    return 0.5 * (plateau_hi + plateau_lo)


def _circular_smooth(psi, periodic):
    k = SMOOTH_WINDOW // 2
    if periodic:
        return sum(np.roll(psi, s, axis=1) for s in range(-k, k + 1)) / SMOOTH_WINDOW
    pad = np.pad(psi, ((0, 0), (k, k)), mode="edge")
    return sum(pad[:, k + s: k + s + psi.shape[1]] for s in range(-k, k + 1)) / SMOOTH_WINDOW


def interval_rows(theta, psi, den, hi, lo, periodic):
    """Rising-edge crossing and sensitive interval per row.

    Returns ``(crossing, left, right, ok)`` in radians; on a periodic sweep
    the bounds are unwrapped around the crossing and may leave [0, 2*pi).
    """
    rows, n = psi.shape
    r = np.arange(rows)
    s = _circular_smooth(psi, periodic)
    sden = _circular_smooth(den, periodic)
    good = _usable(sden, WALK_GUARD) & (sden > 0)
    z = 0.5 * (hi + lo)
    span = hi - lo
    step = TWO_PI / n if periodic else None

    cols = n if periodic else n - 1
    k_all = np.arange(cols)
    k_next = (k_all + 1) % n
    cur, nxt = s[:, k_all], s[:, k_next]
    cand = good[:, k_all] & good[:, k_next] & (cur < z[:, None]) & (nxt >= z[:, None])
    k = np.argmax(np.where(cand, nxt - cur, -np.inf), axis=1)
    found = np.any(cand, axis=1)

    def position(idx):
        # unwrapped global shift of (possibly out-of-range) sample indices
        if periodic:
            return theta[0] + idx * step
        return theta[np.clip(idx, 0, n - 1)]

    s0, s1 = s[r, k], s[r, (k + 1) % n]
    frac = (z - s0) / np.where(s1 > s0, s1 - s0, 1.0)
    crossing = position(k) + frac * (position(k + 1) - position(k))

    reach = n // 2 if periodic else n
    j = np.arange(reach)[None, :]

    def walk(idx, thr, beyond):
        inside = np.ones(idx.shape, bool) if periodic else (idx >= 0) & (idx < n)
        ic = idx % n if periodic else np.clip(idx, 0, n - 1)
        vals = np.concatenate([z[:, None], s[r[:, None], ic]], axis=1)
        pos = np.concatenate([crossing[:, None], position(idx)], axis=1)
        usable = np.concatenate([np.ones((rows, 1), bool), inside & good[r[:, None], ic]], axis=1)
        level = beyond(vals, thr[:, None])
        fail = ~usable | level
        f = np.argmax(fail, axis=1)
        complete = np.any(fail, axis=1) & usable[r, f] & level[r, f] & (f > 0)
        fm = np.maximum(f - 1, 0)
        v0, v1 = vals[r, fm], vals[r, f]
        t0, t1 = pos[r, fm], pos[r, f]
        w = np.clip((thr - v0) / np.where(v1 != v0, v1 - v0, 1.0), 0.0, 1.0)
        return t0 + w * (t1 - t0), complete

    left, ok_l = walk(k[:, None] - j, lo + DEPARTURE * span, lambda v, t: v <= t)
    right, ok_r = walk(k[:, None] + 1 + j, hi - DEPARTURE * span, lambda v, t: v >= t)
    ok = found & ok_l & ok_r
    return crossing, left, right, ok


def estimate_sensitive_interval(sweep, pixel=(0, 0), plateaus=None):
    """Interval around the rising edge where the raw fraction has left both
    plateaus by more than 2 % of their separation."""
    one = sweep.pixel_rows(pixel)
    if plateaus is None:
        plateaus = estimate_plateaus(one)
    hi, lo = plateaus
    zero_equivalent(hi, lo)
    psi, den = one.rows()
    _, left, right, ok = interval_rows(one.theta_g, psi, den, np.array([hi]), np.array([lo]),
                                       one.periodic)
    if not ok[0]:
        raise DegenerateSweepError("no rising zero-equivalent crossing on the positive-denominator edge")
    return float(left[0]), float(right[0])


# -- calibration table -----------------------------------------------------

@dataclass(frozen=True)
class PixelCalibration:
    plateau_hi: float
    plateau_lo: float
    zero_equiv: float
    zero_phase: float
    sensitive_interval: tuple
    response: MonotoneResponse


@dataclass(frozen=True, eq=False)
class CalibrationTable:
    """Everything reconstruction needs, one entry per pixel.

    ``xs`` is the fine global-shift grid shared by all pixels and ``ys``
    holds each pixel's fitted response on it (rows in C order over the
    image).  Per-pixel maps have shape (height, width); invalid pixels
    carry NaN.
    """

    coding: object
    exposure: float
    reference_depth: float
    doi: float
    seed: int
    xs: np.ndarray
    ys: np.ndarray
    plateau_hi: np.ndarray
    plateau_lo: np.ndarray
    zero_phase: np.ndarray
    interval_lo: np.ndarray
    interval_hi: np.ndarray
    smoothing: np.ndarray
    valid: np.ndarray
    mask: np.ndarray
    zero_phase_median: float
    noise: dict = field(default_factory=dict)
    ds: np.ndarray = None

    def __post_init__(self):
        if self.ds is None:
            ds = np.full_like(self.ys, np.nan)
            ok = self.valid.ravel()
            if np.any(ok):
                ds[ok] = hermite_slopes(self.xs, self.ys[ok])
            object.__setattr__(self, "ds", ds)

    @property
    def resolution(self):
        return self.valid.shape[1], self.valid.shape[0]

    @property
    def zero_equiv(self):
        return 0.5 * (self.plateau_hi + self.plateau_lo)

    @property
    def band(self):
        """Raw-fraction limits of each pixel's sensitive interval."""
        span = self.plateau_hi - self.plateau_lo
        return self.plateau_lo + DEPARTURE * span, self.plateau_hi - DEPARTURE * span

    @property
    def reference_phase(self):
        return phase_from_depth(self.reference_depth, self.coding)

    @property
    def valid_fraction(self):
        return float(np.mean(self.valid))

    def _flat(self, pixel):
        r, c = pixel
        h, w = self.valid.shape
        if not (0 <= r < h and 0 <= c < w):
            raise DomainError(f"pixel {pixel} outside {w}x{h} sensor")
        return r * w + c

    def pixel(self, pixel):
        i = self._flat(pixel)
        r, c = pixel
        if not self.valid[r, c]:
            raise DomainError(f"pixel {pixel} is invalid in this calibration")
        return PixelCalibration(
            float(self.plateau_hi[r, c]), float(self.plateau_lo[r, c]), float(self.zero_equiv[r, c]),
            float(self.zero_phase[r, c]), (float(self.interval_lo[r, c]), float(self.interval_hi[r, c])),
            MonotoneResponse(self.xs, self.ys[i], self.ds[i], float(self.smoothing[r, c])))

    def invert(self, psi):
        """Global shift at which each pixel's response reaches ``psi`` (map).

        NaN where the pixel is invalid or ``psi`` lies outside the pixel's
        sensitive band.
        """
        psi = np.asarray(psi, dtype=np.float64)
        if psi.shape != self.valid.shape:
            raise DomainError("psi map does not match the calibration resolution")
        blo, bhi = self.band
        inside = self.valid & (psi >= blo) & (psi <= bhi)
        out = np.full(psi.size, np.nan)
        idx = np.flatnonzero(inside.ravel())
        if idx.size:
            out[idx] = _kernels.invert_rows(self.xs, self.ys[idx], self.ds[idx], psi.ravel()[idx])
        return out.reshape(psi.shape)

    def offsets(self, psi):
        """Map version of :func:`measure_offset`; NaN marks unusable pixels."""
        theta = self.invert(psi)
        return self.zero_phase_median + self.mask - theta

    def config_summary(self):
        return {"coding": self.coding.describe(), "exposure": self.exposure,
                "reference_depth": self.reference_depth, "doi": self.doi, "seed": int(self.seed),
                "noise": dict(self.noise)}


def measure_offset(psi, pixel, table):
    """Phase offset (rad) of a measurement from the calibration reference.

    Positive for targets farther than the reference; zero when ``psi``
    equals the pixel's zero equivalent.
    """
    r, c = pixel
    pc = table.pixel(pixel)
    blo, bhi = (b[r, c] for b in table.band)
    if not blo <= psi <= bhi:
        raise OutOfSensitiveRangeError(
            f"raw fraction {psi!r} outside the sensitive band [{blo:.6g}, {bhi:.6g}] of pixel {pixel}")
    theta = pc.response.invert(psi)
    return table.zero_phase_median + table.mask[r, c] - theta


def centred_mask(zero_phase, valid):
    """``zero_phase - median`` over valid pixels with a median of exactly 0."""
    mask = np.full(zero_phase.shape, np.nan)
    vals = zero_phase[valid]
    med = float(np.median(vals))
    m = vals - med
    for _ in range(8):
        c = float(np.median(m))
        if c == 0.0:
            break
        m = m - c
    mask[valid] = m
    return mask, med


def _circular_centre(angles):
    return math.atan2(np.mean(np.sin(angles)), np.mean(np.cos(angles)))


def build_calibration(target_depth, acq, resolution=None, doi=None, coarse_steps=COARSE_STEPS,
                      step=FINE_STEP):
    """Run the three-stage calibration against a flat target.

    ``doi`` (default: the target depth) fixes the global shift stored with
    the table; the target must lie inside that DOI's sensitive range.
    """
    coding = acq.coding
    if resolution is None:
        resolution = (DEFAULT_RESOLUTION if acq.pixel_phase is None
                      else (acq.pixel_phase.shape[1], acq.pixel_phase.shape[0]))
    target = make_plane(target_depth, resolution=resolution, nu=coding.nu)
    doi = float(target_depth if doi is None else doi)
    theta_doi = doi_to_global_shift(doi, coding)
    dphi, _ = sensitive_range(coding)
    gap = (phase_from_depth(target_depth, coding) - phase_from_depth(doi, coding) + math.pi) % TWO_PI - math.pi
    if abs(gap) > 0.5 * dphi:
        raise CalibrationError(
            f"reference depth {target_depth} m lies outside the sensitive range of DOI {doi} m",
            invalid_fraction=1.0)
    table_coding = coding.with_theta_g(theta_doi)

    coarse = coarse_sweep(target, acq, coarse_steps)
    psi, den = coarse.rows()
    hi, lo, ok_p = plateau_rows(psi, den)
    hi = np.where(ok_p, hi, 0.0)
    lo = np.where(ok_p, lo, -1.0)
    cross, left, right, ok_i = interval_rows(coarse.theta_g, psi, den, hi, lo, True)
    live = ok_p & ok_i
    pixels = live.size
    if np.mean(~live) > MAX_INVALID_FRACTION:
        raise CalibrationError(f"{np.mean(~live):.1%} of pixels show no usable edge",
                               invalid_fraction=float(np.mean(~live)))

    # bring every pixel's edge onto the same branch before taking the union
    centre = _circular_centre(cross[live]) % TWO_PI
    shift = TWO_PI * np.round((cross - centre) / TWO_PI)
    left, right, cross = left - shift, right - shift, cross - shift
    margin = MARGIN_STEPS * TWO_PI / coarse_steps
    window = (float(np.min(left[live])) - margin, float(np.max(right[live])) + margin)
    fine = fine_sweep(target, acq, window, step)
    if len(fine) < 4:
        raise CalibrationError(f"fine sweep produced only {len(fine)} samples; step too coarse",
                               invalid_fraction=1.0)

    xs = fine.theta_g
    fpsi, _ = fine.rows()
    ys = np.full((pixels, xs.size), np.nan)
    ds = np.full_like(ys, np.nan)
    lam = np.full(pixels, np.nan)
    status = np.full(pixels, 2)
    todo = np.flatnonzero(live)
    for start in range(0, todo.size, FIT_CHUNK):
        part = todo[start:start + FIT_CHUNK]
        f, d_, l_, st = fit_monotone_rows(xs, fpsi[part])
        ys[part], ds[part], lam[part], status[part] = f, d_, l_, st

    valid = live & (status == 0)
    span = hi - lo
    zero_phase = np.full(pixels, np.nan)
    ilo = np.full(pixels, np.nan)
    ihi = np.full(pixels, np.nan)
    v = np.flatnonzero(valid)
    if v.size:
        z = 0.5 * (hi + lo)
        zero_phase[v] = _kernels.invert_rows(xs, ys[v], ds[v], z[v])
        ilo[v] = _kernels.invert_rows(xs, ys[v], ds[v], (lo + DEPARTURE * span)[v])
        ihi[v] = _kernels.invert_rows(xs, ys[v], ds[v], (hi - DEPARTURE * span)[v])
    valid &= np.isfinite(zero_phase) & np.isfinite(ilo) & np.isfinite(ihi)
    bad = float(np.mean(~valid))
    if bad > MAX_INVALID_FRACTION:
        raise CalibrationError(f"{bad:.1%} of pixels failed calibration", invalid_fraction=bad)

    w, h = resolution
    shape = (h, w)
    valid2 = valid.reshape(shape)
    mask, med = centred_mask(zero_phase.reshape(shape), valid2)
    nan_out = lambda a: np.where(valid, a, np.nan).reshape(shape)  # noqa: E731
    ys[~valid] = np.nan
    ds[~valid] = np.nan
    return CalibrationTable(
        coding=table_coding, exposure=acq.exposure, reference_depth=float(target_depth), doi=doi,
        seed=int(acq.seed), xs=xs, ys=ys, plateau_hi=nan_out(hi), plateau_lo=nan_out(lo),
        zero_phase=nan_out(zero_phase), interval_lo=nan_out(ilo), interval_hi=nan_out(ihi),
        smoothing=nan_out(lam), valid=valid2, mask=mask, zero_phase_median=med,
        noise=acq.describe()["noise"], ds=ds)
