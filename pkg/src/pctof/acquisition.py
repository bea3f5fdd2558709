"""Simulated K-tap correlation exposures and the raw fraction."""
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .errors import DomainError, FormatError, UnsupportedCodingError
from .scene import SceneFrame, translate_depth
from .signal_model import SPEED_OF_LIGHT, CodingConfig, tap_correlations

PSI_EPSILON = 1e-9

# independent noise streams per use of the simulator
STREAM_MEASURE = 0
STREAM_COARSE = 1
STREAM_FINE = 2


@dataclass(frozen=True)
class NoiseModel:
    """Per-tap noise: additive Gaussian (``sigma_read``) plus optional shot noise.

    ``shot_scale`` converts intensity units to electrons, so a tap of
    intensity ``I`` gets Poisson(``I * shot_scale``) / ``shot_scale``.
    ``quantization`` > 0 rounds taps to that step after noise.
    """

    sigma_read: float = 0.0
    shot_enabled: bool = False
    shot_scale: float = 1.0
    quantization: float = 0.0

    def __post_init__(self):
        if not self.sigma_read >= 0:
            raise DomainError("sigma_read must be >= 0")
        if self.shot_enabled and not self.shot_scale > 0:
            raise DomainError("shot_scale must be positive when shot noise is enabled")
        if self.quantization < 0:
            raise DomainError("quantization step must be >= 0")

    @property
    def is_silent(self):
        return self.sigma_read == 0 and not self.shot_enabled and self.quantization == 0

    def total_sigma(self, k_taps=4):
        """Omega: root-sum-square of the (equal) per-tap deviations."""
        return math.sqrt(k_taps) * self.sigma_read


@dataclass(frozen=True, eq=False)
class AcquisitionConfig:
    """Exposure settings.  ``pixel_phase`` optionally adds a fixed per-pixel
    phase error (radians), the sensor non-uniformity calibration removes."""

    coding: CodingConfig
    exposure: float = 1e-3
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    acquisitions: int = 1
    pixel_phase: np.ndarray = None

    def __post_init__(self):
        if not self.exposure > 0:
            raise DomainError("exposure must be positive")
        if self.exposure * self.coding.nu < 1.0:
            raise DomainError("exposure must integrate at least one full period")
        if int(self.acquisitions) != self.acquisitions or self.acquisitions < 1:
            raise DomainError("acquisitions must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must fit in 64 unsigned bits")
        if self.pixel_phase is not None:
            p = np.array(self.pixel_phase, dtype=np.float64)
            if p.ndim != 2 or not np.all(np.isfinite(p)):
                raise DomainError("pixel_phase must be a finite 2-D map")
            p.setflags(write=False)
            object.__setattr__(self, "pixel_phase", p)

    @property
    def periods(self):
        return self.exposure * self.coding.nu

    def with_coding(self, coding):
        return replace(self, coding=coding)

    def with_theta_g(self, theta_g):
        return replace(self, coding=self.coding.with_theta_g(theta_g))

    def with_noise(self, noise):
        return replace(self, noise=noise)

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def full_scale(self):
        """Tap value of a unit-albedo pixel whose gate collects the whole
        period's light: the reference for relative noise levels."""
        m = self.coding.modulation
        per_period = (m.amplitude * m.sigma_m * math.sqrt(2.0 * math.pi) if self.coding.is_pulsed
                      else m.amplitude * 2.0 * math.pi)
        return self.periods * per_period / self.coding.omega

    def relative_noise(self, fraction, **kw):
        """Copy whose Gaussian read noise is ``fraction`` of :meth:`full_scale`."""
        return self.with_noise(NoiseModel(sigma_read=float(fraction) * self.full_scale(), **kw))

    def describe(self):
        return {
            "coding": self.coding.describe(),
            "exposure": self.exposure,
            "seed": int(self.seed),
            "acquisitions": int(self.acquisitions),
            "noise": {"sigma_read": self.noise.sigma_read, "shot_enabled": self.noise.shot_enabled,
                      "shot_scale": self.noise.shot_scale, "quantization": self.noise.quantization},
        }

    @classmethod
    def from_description(cls, d):
        n = d["noise"]
        return cls(CodingConfig.from_description(d["coding"]), float(d["exposure"]),
                   NoiseModel(float(n["sigma_read"]), bool(n["shot_enabled"]), float(n["shot_scale"]),
                              float(n["quantization"])),
                   int(d["seed"]), int(d["acquisitions"]))


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TapFrame:
    """``taps`` has shape (K, height, width)."""

    taps: np.ndarray
    acq: AcquisitionConfig

    def __post_init__(self):
        t = np.asarray(self.taps)
        if t.ndim != 3 or t.shape[0] != self.acq.coding.k_taps:
            raise DomainError(f"expected {self.acq.coding.k_taps} tap images, got shape {t.shape}")
        if not np.all(np.isfinite(t)):
            raise DomainError("tap intensities must be finite")
        object.__setattr__(self, "taps", _readonly(t))

    @property
    def resolution(self):
        return self.taps.shape[2], self.taps.shape[1]

    def differences(self):
        """The two tap differences a 4-tap sensor reports: (I0 - I2, I1 - I3)."""
        if self.taps.shape[0] != 4:
            raise UnsupportedCodingError("tap differences need exactly 4 taps")
        return self.taps[0] - self.taps[2], self.taps[1] - self.taps[3]


@dataclass(frozen=True, eq=False)
class RawFractionFrame:
    psi: np.ndarray
    valid: np.ndarray
    numerator: np.ndarray
    denominator: np.ndarray


def frame_rng(seed, stream, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(index)]))


def clean_taps(scene, acq):
    """Noise-free tap intensities, shape (K, H, W)."""
    coding = acq.coding
    phase = 2.0 * coding.omega * scene.depth / SPEED_OF_LIGHT
    if acq.pixel_phase is not None:
        if acq.pixel_phase.shape != phase.shape:
            raise DomainError("pixel_phase shape does not match the scene")
        phase = phase + acq.pixel_phase
    # flat targets repeat one phase many times; evaluate each distinct value once
    uniq, inv = np.unique(phase, return_inverse=True)
    corr = tap_correlations(uniq, coding)[:, inv.reshape(phase.shape)]
    ambient = scene.ambient * (math.pi / coding.omega)  # both demodulations average 1/2
    return acq.periods * (scene.albedo[None] * corr + ambient[None])


def add_noise(clean, noise, rng, acquisitions=1):
    """Draw one noisy realisation of ``clean`` (averaged over ``acquisitions``)."""
    out = clean
    if noise.shot_enabled:
        lam = np.clip(clean, 0.0, None) * noise.shot_scale * acquisitions
        out = rng.poisson(lam).astype(np.float64) / (noise.shot_scale * acquisitions)
    if noise.sigma_read > 0:
        out = out + rng.standard_normal(clean.shape) * (noise.sigma_read / math.sqrt(acquisitions))
    if noise.quantization > 0:
        out = np.round(out / noise.quantization) * noise.quantization
    return out


def render_taps(scene, acq, frame_index=0, stream=STREAM_MEASURE):
    """Render one exposure of ``scene``.

    Each frame draws its noise from a generator seeded by
    ``(acq.seed, stream, frame_index)``, so results depend only on those.
    """
    if not isinstance(scene, SceneFrame):
        raise DomainError("render_taps expects a SceneFrame")
    if scene.range_limit != acq.coding.unambiguity_range():
        raise DomainError("scene was built for a different modulation frequency")
    taps = clean_taps(scene, acq)
    if not acq.noise.is_silent:
        taps = add_noise(taps, acq.noise, frame_rng(acq.seed, stream, frame_index), acq.acquisitions)
    return TapFrame(taps, acq)


def raw_fraction_from_differences(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    scale = max(float(np.max(np.abs(num), initial=0.0)), float(np.max(np.abs(den), initial=0.0)))
    return _fraction(num, den, PSI_EPSILON * scale)


def _fraction(num, den, eps):
    valid = (np.abs(den) >= eps) & (den != 0)
    psi = np.zeros_like(num)
    np.divide(num, den, out=psi, where=valid)
    return RawFractionFrame(psi, valid, num, den)


def raw_fraction(taps):
    """Psi = (I0 - I2) / (I1 - I3); invalid (and 0) where |I1 - I3| < eps.

    ``eps`` is 1e-9 times the largest tap magnitude in the frame.
    """
    if taps.taps.shape[0] != 4:
        raise UnsupportedCodingError(f"raw fraction needs 4 taps, got {taps.taps.shape[0]}")
    num, den = taps.differences()
    eps = PSI_EPSILON * float(np.max(np.abs(taps.taps)))
    return _fraction(num, den, eps)


def rail_sweep(scene, acq, offsets):
    """One frame per rail offset (meters); frame ``k`` uses noise index ``k``."""
    return [render_taps(translate_depth(scene, d), acq, frame_index=k) for k, d in enumerate(offsets)]


def rail_offsets(half_span=0.025, step=0.001):
    """Symmetric offsets ``-half_span .. +half_span`` at ``step`` (51 by default)."""
    n = int(round(half_span / step))
    return [k * step for k in range(-n, n + 1)]


def export_taps(frame, directory, fmt="csv"):
    """Write ``tap<i>.<fmt>`` maps plus ``tapframe.json`` with the acquisition."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    writer = io.write_csv_map if fmt == "csv" else io.write_pfm
    for i, t in enumerate(frame.taps):
        writer(directory / f"tap{i}.{fmt}", t)
    (directory / "tapframe.json").write_text(
        json.dumps({"format": fmt, "acquisition": frame.acq.describe()}, indent=2, sort_keys=True) + "\n")


def import_taps(directory):
    directory = Path(directory)
    try:
        meta = json.loads((directory / "tapframe.json").read_text())
        acq = AcquisitionConfig.from_description(meta["acquisition"])
        fmt = meta["format"]
    except (OSError, ValueError, KeyError) as exc:
        raise FormatError(f"{directory}: unreadable tapframe.json ({exc})") from exc
    reader = io.read_csv_map if fmt == "csv" else io.read_pfm
    taps = np.stack([reader(directory / f"tap{i}.{fmt}") for i in range(acq.coding.k_taps)])
    return TapFrame(taps, acq)
