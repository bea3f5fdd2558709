"""Depth maps from tap frames: four-quadrant phase and calibrated pulsed mode."""
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .acquisition import PSI_EPSILON, raw_fraction
from .errors import CompatibilityError, DomainError, EmptyMetricError, UnsupportedCodingError
from .signal_model import SPEED_OF_LIGHT, TWO_PI, phase_from_depth

SINUSOID_MODE = "sinusoid"
PCTOF_MODE = "pctof"


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Depth in meters; invalid pixels hold NaN and ``valid`` False."""

    depth: np.ndarray
    valid: np.ndarray
    mode: str

    def __post_init__(self):
        d = np.array(self.depth, dtype=np.float64)
        v = np.array(self.valid, dtype=bool)
        if d.shape != v.shape or d.ndim != 2:
            raise DomainError("depth and validity maps must be 2-D and of one shape")
        v &= np.isfinite(d)
        d[~v] = np.nan
        if np.any(d[v] < 0):
            raise DomainError("valid depths must be non-negative")
        for a in (d, v):
            a.setflags(write=False)
        object.__setattr__(self, "depth", d)
        object.__setattr__(self, "valid", v)

    @property
    def valid_fraction(self):
        return float(np.mean(self.valid))


def _half_range_scale(coding):
    return SPEED_OF_LIGHT / (2.0 * coding.omega)


def sinusoid_depth(taps, systematic_error_demo=False):
    """Phase from the four-quadrant angle of (I1 - I3, I0 - I2) plus theta_G.

    Exact for the sinusoid coding.  Running it on other codings is refused
    unless ``systematic_error_demo`` is set, which exists to show the bias
    such a mismatch produces.
    """
    coding = taps.acq.coding
    if coding.k_taps != 4:
        raise UnsupportedCodingError("four-quadrant reconstruction needs 4 taps")
    if not coding.is_sinusoid and not systematic_error_demo:
        raise UnsupportedCodingError(
            "arctangent reconstruction is only exact for sinusoidal coding; "
            "pass systematic_error_demo=True to run it anyway")
    num, den = taps.differences()
    eps = PSI_EPSILON * float(np.max(np.abs(taps.taps)))
    valid = (np.abs(num) >= eps) | (np.abs(den) >= eps)
    if eps == 0:
        valid &= (num != 0) | (den != 0)
    phase = np.mod(np.arctan2(den, num) + coding.theta_g, TWO_PI)
    phase[phase >= TWO_PI] = 0.0
    return DepthMap(np.where(valid, phase * _half_range_scale(coding), np.nan), valid, SINUSOID_MODE)


def check_compatible(taps, table):
    a, b = taps.acq.coding, table.coding
    problems = []
    if a.modulation.kind != b.modulation.kind or a.demodulation.kind != b.demodulation.kind:
        problems.append("signal kinds")
    for name, x, y in (("frequency", a.nu, b.nu), ("sigma_m", a.modulation.sigma_m, b.modulation.sigma_m),
                       ("sigma_d", a.demodulation.sigma_d, b.demodulation.sigma_d), ("taps", a.k_taps, b.k_taps)):
        if not math.isclose(x, y, rel_tol=1e-12, abs_tol=0.0):
            problems.append(f"{name} ({x!r} vs {y!r})")
    if taps.resolution != table.resolution:
        problems.append(f"resolution ({taps.resolution} vs {table.resolution})")
    if problems:
        raise CompatibilityError("calibration does not match the acquisition: " + ", ".join(problems))


def pctof_depth(taps, table, doi=None):
    """Pulsed-mode depth from a calibrated per-pixel response.

    A pixel whose raw fraction equals what the calibration saw at global
    shift ``theta_p`` sits at phase ``phi_ref + theta_m - theta_p`` where
    ``theta_m`` is the shift used for this frame.  The result is expressed
    as the DOI plus the wrapped phase offset from it.  Pixels outside their
    sensitive band, or on the wrong branch of the raw fraction, are flagged.
    """
    check_compatible(taps, table)
    coding = taps.acq.coding
    doi = table.doi if doi is None else float(doi)
    rf = raw_fraction(taps)
    offset = table.offsets(rf.psi)  # zero_phase - theta_p per pixel
    phi = table.reference_phase + coding.theta_g - table.zero_phase_median - table.mask + offset
    delta = np.mod(phi - phase_from_depth(doi, coding) + math.pi, TWO_PI) - math.pi
    depth = np.mod(doi + delta * _half_range_scale(coding), coding.unambiguity_range())
    valid = rf.valid & (rf.denominator > 0) & np.isfinite(offset)
    return DepthMap(np.where(valid, depth, np.nan), valid, PCTOF_MODE)


def rms_error(depth_map, truth):
    """``(rms, valid_fraction)`` of ``depth - truth`` over valid pixels."""
    t = truth.depth if hasattr(truth, "depth") else np.asarray(truth, dtype=np.float64)
    if t.shape != depth_map.depth.shape:
        raise DomainError("depth map and ground truth differ in size")
    v = depth_map.valid
    if not np.any(v):
        raise EmptyMetricError("no valid pixels to compare")
    err = depth_map.depth[v] - t[v]
    return float(np.sqrt(np.mean(err * err))), float(np.mean(v))


def depth_slice(depth_map, row, half_width=2):
    """Per-column mean over rows ``row - half_width .. row + half_width``.

    Columns without a valid pixel in the band come back as NaN.
    """
    h = depth_map.depth.shape[0]
    if half_width < 0 or row - half_width < 0 or row + half_width >= h:
        raise DomainError(f"rows {row}±{half_width} fall outside 0..{h - 1}")
    band = depth_map.depth[row - half_width: row + half_width + 1]
    ok = depth_map.valid[row - half_width: row + half_width + 1]
    count = ok.sum(axis=0)
    total = np.where(ok, band, 0.0).sum(axis=0)
    return np.where(count > 0, total / np.maximum(count, 1), np.nan)


def export_depth_map(depth_map, directory, stem="depth"):
    """Write ``<stem>.csv``, ``<stem>.pfm`` and ``<stem>.pgm`` (+ scale sidecar)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    io.write_csv_map(directory / f"{stem}.csv", depth_map.depth)
    io.write_pfm(directory / f"{stem}.pfm", depth_map.depth)
    io.write_pgm16(directory / f"{stem}.pgm", depth_map.depth, depth_map.valid)
    return [directory / f"{stem}.{ext}" for ext in ("csv", "pfm", "pgm")]
