"""Modulation/demodulation signal pairs and the pulsed correlation function.

Phases are in radians, depths in meters.  A tap with shift ``theta``
integrates ``i(phi - phase_depth) * s(phi - theta)`` over one period, so
every correlation is a function of ``phase_depth - theta`` alone.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import DomainError, ModelValidityError, UnsupportedCodingError

SPEED_OF_LIGHT = 299792458.0
TWO_PI = 2.0 * math.pi
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

PULSE = "gaussian_pulse_train"
SINUSOID = "sinusoid"
RECT = "smoothed_rect"

UNIT_AMPLITUDE = "unit-amplitude"
UNIT_AVERAGE_POWER = "unit-average-power"
_CONVENTIONS = (UNIT_AMPLITUDE, UNIT_AVERAGE_POWER)


def _check_narrow(sigma, what):
    if not 6.0 * sigma < TWO_PI:
        raise ModelValidityError(
            f"{what} = {sigma:.6g} rad breaks the narrow-pulse assumption (6*sigma < 2*pi)")


@dataclass(frozen=True)
class ModulationSpec:
    """Light-source modulation over one period of phase.

    ``GaussianPulseTrain``: a Gaussian of width ``sigma_m`` repeated every
    2*pi.  ``Sinusoid``: ``1 + cos(phi)``.  Under ``unit-amplitude`` the
    pulse peaks at 1; under ``unit-average-power`` it is scaled to a
    period mean of 1, which the sinusoid has under either convention.
    """

    kind: str
    sigma_m: float = 0.0
    convention: str = UNIT_AMPLITUDE

    def __post_init__(self):
        if self.convention not in _CONVENTIONS:
            raise DomainError(f"unknown amplitude convention {self.convention!r}")
        if self.kind == PULSE:
            if not self.sigma_m > 0:
                raise DomainError("sigma_m must be positive for a pulse train")
            _check_narrow(self.sigma_m, "sigma_m")
        elif self.kind != SINUSOID:
            raise UnsupportedCodingError(f"unknown modulation kind {self.kind!r}")

    @classmethod
    def gaussian_pulse(cls, sigma_m, convention=UNIT_AMPLITUDE):
        return cls(PULSE, float(sigma_m), convention)

    @classmethod
    def sinusoid(cls, convention=UNIT_AMPLITUDE):
        return cls(SINUSOID, 0.0, convention)

    @property
    def amplitude(self):
        if self.kind == PULSE and self.convention == UNIT_AVERAGE_POWER:
            return math.sqrt(TWO_PI) / self.sigma_m
        return 1.0

    def evaluate(self, phi):
        phi = np.asarray(phi, dtype=np.float64)
        if self.kind == SINUSOID:
            return self.amplitude * (1.0 + np.cos(phi))
        w = _kernels.wrap_phase(phi)
        out = np.zeros_like(w)
        for n in (-1, 0, 1):
            u = w + n * TWO_PI
            out = out + np.exp(-u * u / (2.0 * self.sigma_m ** 2))
        return self.amplitude * out

    def features(self):
        return (0.0,) if self.kind == PULSE else ()


@dataclass(frozen=True)
class DemodulationSpec:
    """Sensor gain over one period: a smoothed 50 % rect or ``(1 + cos)/2``.

    The rect is high for ``|phi| < pi/2`` and its edges are smoothed by a
    unit-area Gaussian of width ``sigma_d``, so its height stays 1.
    """

    kind: str
    sigma_d: float = 0.0
    duty: float = 0.5

    def __post_init__(self):
        if self.duty != 0.5:
            raise DomainError("only a duty cycle of 0.5 is supported")
        if self.kind == RECT:
            if self.sigma_d < 0:
                raise DomainError("sigma_d must be non-negative")
            if self.sigma_d > 0:
                _check_narrow(self.sigma_d, "sigma_d")
        elif self.kind != SINUSOID:
            raise UnsupportedCodingError(f"unknown demodulation kind {self.kind!r}")

    @classmethod
    def smoothed_rect(cls, sigma_d=0.0):
        return cls(RECT, float(sigma_d))

    @classmethod
    def sinusoid(cls):
        return cls(SINUSOID)

    @property
    def mean(self):
        return 0.5

    def evaluate(self, phi):
        phi = np.asarray(phi, dtype=np.float64)
        if self.kind == SINUSOID:
            return 0.5 * (1.0 + np.cos(phi))
        w = _kernels.wrap_phase(phi)
        if self.sigma_d == 0.0:
            aw = np.abs(w)
            return np.where(aw < 0.5 * math.pi, 1.0, np.where(aw == 0.5 * math.pi, 0.5, 0.0))
        k = 1.0 / (math.sqrt(2.0) * self.sigma_d)
        out = np.zeros_like(w)
        for n in (-1, 0, 1):
            u = w + n * TWO_PI
            out = out + _kernels.erf_diff(k * (u - 0.5 * math.pi), k * (u + 0.5 * math.pi))
        return 0.5 * out

    def features(self):
        return (-0.5 * math.pi, 0.5 * math.pi) if self.kind == RECT else ()


@dataclass(frozen=True)
class CodingConfig:
    """A homodyne coding: signal pair, frequency, tap count and global shift."""

    nu: float
    modulation: ModulationSpec
    demodulation: DemodulationSpec
    k_taps: int = 4
    theta_g: float = 0.0

    def __post_init__(self):
        if not self.nu > 0:
            raise DomainError("frequency must be positive")
        if int(self.k_taps) != self.k_taps or self.k_taps < 3:
            raise DomainError("at least 3 taps are required")
        if not math.isfinite(self.theta_g):
            raise DomainError("theta_g must be finite")
        object.__setattr__(self, "theta_g", float(self.theta_g) % TWO_PI)
        if self.is_pulsed:
            _check_narrow(self.sigma_eff, "sigma_eff")

    @property
    def omega(self):
        return TWO_PI * self.nu

    @property
    def is_pulsed(self):
        return self.modulation.kind == PULSE and self.demodulation.kind == RECT

    @property
    def is_sinusoid(self):
        return self.modulation.kind == SINUSOID and self.demodulation.kind == SINUSOID

    @property
    def mode(self):
        if self.is_pulsed:
            return "pctof"
        if self.is_sinusoid:
            return "sinusoid"
        return "mixed"

    @property
    def tap_shifts(self):
        i = np.arange(self.k_taps)
        return (TWO_PI * i / self.k_taps + self.theta_g) % TWO_PI

    @property
    def sigma_eff(self):
        return math.hypot(self.modulation.sigma_m, self.demodulation.sigma_d)

    @property
    def rise_time(self):
        """Duration of the correlation edge between its 1/e^2 points, seconds."""
        return 4.0 * self.sigma_eff / self.omega

    def unambiguity_range(self):
        return SPEED_OF_LIGHT / (2.0 * self.nu)

    def with_theta_g(self, theta_g):
        return replace(self, theta_g=theta_g)

    def pulse_gain(self):
        """Prefactor turning the unit Gaussian edge integral into C_i."""
        m = self.modulation
        return m.amplitude * (m.sigma_m / self.sigma_eff) / self.omega

    def describe(self):
        return {
            "nu": self.nu,
            "k_taps": self.k_taps,
            "theta_g": self.theta_g,
            "modulation": {"kind": self.modulation.kind, "sigma_m": self.modulation.sigma_m,
                           "convention": self.modulation.convention},
            "demodulation": {"kind": self.demodulation.kind, "sigma_d": self.demodulation.sigma_d,
                             "duty": self.demodulation.duty},
        }

    @classmethod
    def from_description(cls, d):
        m = d["modulation"]
        s = d["demodulation"]
        return cls(
            nu=float(d["nu"]),
            modulation=ModulationSpec(m["kind"], float(m["sigma_m"]), m["convention"]),
            demodulation=DemodulationSpec(s["kind"], float(s["sigma_d"]), float(s["duty"])),
            k_taps=int(d["k_taps"]),
            theta_g=float(d["theta_g"]),
        )


def pulsed_coding(nu=10e6, fwhm=500e-12, sigma_d=0.0774, convention=UNIT_AMPLITUDE, theta_g=0.0, k_taps=4):
    """Pulse-train/rect coding with the pulse width given as a FWHM in seconds."""
    sigma_m = (fwhm * TWO_PI * nu) / FWHM_PER_SIGMA
    return CodingConfig(nu, ModulationSpec.gaussian_pulse(sigma_m, convention),
                        DemodulationSpec.smoothed_rect(sigma_d), k_taps, theta_g)


def sinusoid_coding(nu=10e6, theta_g=0.0, k_taps=4):
    return CodingConfig(nu, ModulationSpec.sinusoid(), DemodulationSpec.sinusoid(), k_taps, theta_g)


def phase_from_depth(depth, config):
    """Round-trip phase 2*omega*depth/c, not reduced modulo 2*pi."""
    d = np.asarray(depth, dtype=np.float64)
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise DomainError("depth must be finite and non-negative")
    out = 2.0 * config.omega * d / SPEED_OF_LIGHT
    return float(out) if d.ndim == 0 else out


def depth_from_phase(phase, config):
    out = np.asarray(phase, dtype=np.float64) * SPEED_OF_LIGHT / (2.0 * config.omega)
    return float(out) if out.ndim == 0 else out


def fwhm_to_sigma(fwhm, config):
    """Pulse width in seconds (FWHM) to a Gaussian sigma in phase radians."""
    if fwhm < 0:
        raise DomainError("fwhm must be non-negative")
    sigma = fwhm * config.omega / FWHM_PER_SIGMA
    _check_narrow(sigma, "sigma_m")
    return sigma


def _require_pulsed(config):
    if not config.is_pulsed:
        raise UnsupportedCodingError(
            "closed form needs a Gaussian pulse train with a smoothed-rect demodulation")


def _tap_shift(tap_index, config):
    if not 0 <= tap_index < config.k_taps:
        raise DomainError(f"tap index {tap_index} outside 0..{config.k_taps - 1}")
    return config.tap_shifts[tap_index]


def closed_form_correlation(phase_depth, tap_index, config):
    """Pulsed correlation C_i at the given round-trip phase(s).

    The erf closed form of a Gaussian (width ``sigma_eff``) integrated over
    the pi-wide gate, periodic in ``phase_depth`` with period 2*pi.
    """
    _require_pulsed(config)
    x = np.asarray(phase_depth, dtype=np.float64) - _tap_shift(tap_index, config)
    out = _kernels.pulse_correlation(x, config.sigma_eff, config.pulse_gain())
    return float(out) if out.ndim == 0 else out


def correlation_derivative(phase_depth, tap_index, config):
    """dC_i/d(phase_depth): two Gaussians of opposite sign at the gate edges."""
    _require_pulsed(config)
    x = np.asarray(phase_depth, dtype=np.float64) - _tap_shift(tap_index, config)
    out = _kernels.pulse_slope(x, config.sigma_eff, config.pulse_gain())
    return float(out) if out.ndim == 0 else out


def tap_correlations(phase_depth, config):
    """All K tap correlations, stacked along a new leading axis.

    Supports the pulsed pair (closed form) and the sinusoid pair, whose
    correlation is ``(pi + pi/2 * cos(phase_depth - theta_i)) / omega``.
    """
    phase_depth = np.asarray(phase_depth, dtype=np.float64)
    shifts = config.tap_shifts.reshape((-1,) + (1,) * phase_depth.ndim)
    x = phase_depth[None, ...] - shifts
    if config.is_pulsed:
        return _kernels.pulse_correlation(x, config.sigma_eff, config.pulse_gain())
    if config.is_sinusoid:
        a = config.modulation.amplitude
        return a * (math.pi + 0.5 * math.pi * np.cos(x)) / config.omega
    raise UnsupportedCodingError(f"no closed form for coding mode {config.mode!r}")


def tap_slopes(phase_depth, config):
    """d/d(phase_depth) of every tap correlation, leading axis = tap."""
    phase_depth = np.asarray(phase_depth, dtype=np.float64)
    shifts = config.tap_shifts.reshape((-1,) + (1,) * phase_depth.ndim)
    x = phase_depth[None, ...] - shifts
    if config.is_pulsed:
        return _kernels.pulse_slope(x, config.sigma_eff, config.pulse_gain())
    if config.is_sinusoid:
        a = config.modulation.amplitude
        return -a * 0.5 * math.pi * np.sin(x) / config.omega
    raise UnsupportedCodingError(f"no closed form for coding mode {config.mode!r}")


def plateau_value(config):
    """Correlation of a tap whose gate fully contains the pulse."""
    _require_pulsed(config)
    return config.pulse_gain() * config.sigma_eff * math.sqrt(TWO_PI)


def max_sensitivity_phases(tap_index, config):
    """Phases theta_i -/+ pi/2 where |dC_i/dphi| peaks, reduced to [0, 2*pi)."""
    theta = _tap_shift(tap_index, config)
    return ((theta - 0.5 * math.pi) % TWO_PI, (theta + 0.5 * math.pi) % TWO_PI)


def doi_to_global_shift(doi, config):
    """Global shift placing tap 0's sweep-rising edge on the depth of interest.

    Returns ``(2*omega*doi/c - pi/2) mod 2*pi``.  At the DOI, C_0 then
    rises with the global shift (and falls with depth).
    """
    if not 0.0 <= doi < config.unambiguity_range():
        raise DomainError(
            f"DOI {doi!r} m outside [0, {config.unambiguity_range():.6g}) m")
    shift = (phase_from_depth(doi, config) - 0.5 * math.pi) % TWO_PI
    # rounding in the phase product can land a hair below 2*pi
    return 0.0 if TWO_PI - shift < 1e-12 else shift


def edge_width(sigma_eff, omega):
    """Sensitive range (phase, depth) for an edge of width ``sigma_eff``."""
    if sigma_eff < 0:
        raise DomainError("sigma_eff must be non-negative")
    dphi = 4.0 * sigma_eff
    return dphi, dphi * SPEED_OF_LIGHT / (2.0 * omega)


def sensitive_range(config):
    """Width of the 1/e^2 band of the derivative Gaussian, in phase and depth."""
    _require_pulsed(config)
    return edge_width(config.sigma_eff, config.omega)
