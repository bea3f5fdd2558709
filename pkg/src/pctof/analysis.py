"""Depth-precision measure, sensitivity profiles and mode comparisons."""
import math
from dataclasses import dataclass, field

import numpy as np

from .acquisition import AcquisitionConfig, NoiseModel, render_taps
from .calibration import build_calibration
from .errors import DomainError, IntegrationError
from .numerics.quadrature import quadrature_correlate
from .reconstruction import pctof_depth, sinusoid_depth
from .signal_model import (
    SPEED_OF_LIGHT,
    TWO_PI,
    UNIT_AVERAGE_POWER,
    doi_to_global_shift,
    phase_from_depth,
    pulsed_coding,
    sensitive_range,
    sinusoid_coding,
    tap_slopes,
)

MIN_GRID = 1000
MAX_GRID = 2 ** 22
CONVERGENCE = 1e-6
MODES = ("pctof", "sinusoid")


def _chain(config):
    return 2.0 * config.omega / SPEED_OF_LIGHT


def _quadrature_slopes(phase, config, h=1e-4):
    """Central differences of the quadrature correlation (oracle path)."""
    phase = np.atleast_1d(np.asarray(phase, dtype=np.float64))
    out = np.empty((config.k_taps,) + phase.shape)
    for i, th in enumerate(config.tap_shifts):
        for k, p in np.ndenumerate(phase):
            up = quadrature_correlate(config.modulation, config.demodulation, p + h, th, config.omega, 1e-12)
            dn = quadrature_correlate(config.modulation, config.demodulation, p - h, th, config.omega, 1e-12)
            out[(i,) + k] = (up - dn) / (2.0 * h)
    return out


def local_sensitivity(depth, config, method="closed"):
    """sqrt(sum_i (dC_i/dGamma)^2) at ``depth`` (meters, scalar or array).

    ``method="quadrature"`` differentiates the numerically integrated
    correlation instead of the analytic derivative; it is slow and meant
    for cross-checks.
    """
    d = np.asarray(depth, dtype=np.float64)
    phase = 2.0 * config.omega * d / SPEED_OF_LIGHT
    if method == "closed":
        slopes = tap_slopes(phase, config)
    elif method == "quadrature":
        slopes = _quadrature_slopes(phase, config).reshape((config.k_taps,) + phase.shape)
    else:
        raise DomainError(f"unknown method {method!r}")
    out = _chain(config) * np.sqrt(np.sum(slopes * slopes, axis=0))
    return float(out) if d.ndim == 0 else out


def _grid(config, n):
    return config.unambiguity_range() * np.arange(n) / n


def _mean_sensitivity(config, n):
    # trapezoid rule on a periodic integrand reduces to the plain mean
    return float(np.mean(local_sensitivity(_grid(config, n), config)))


def converged_mean_sensitivity(config, grid_n=4096):
    """Period mean of the local sensitivity and the grid that achieved it.

    The grid is doubled from ``grid_n`` until one more doubling changes the
    mean by less than 1e-6 relative.
    """
    if int(grid_n) != grid_n or grid_n < MIN_GRID:
        raise DomainError(f"grid_n must be an integer >= {MIN_GRID}")
    n = int(grid_n)
    cur = _mean_sensitivity(config, n)
    while n <= MAX_GRID:
        nxt = _mean_sensitivity(config, 2 * n)
        if abs(nxt - cur) <= CONVERGENCE * abs(nxt):
            return cur, n
        n, cur = 2 * n, nxt
    raise IntegrationError(f"sensitivity integral did not converge up to {MAX_GRID} grid points")


def depth_precision_measure(config, e_c, omega_noise, grid_n=4096):
    """chi_bar = e_c / (Omega * range) * integral over one range of the sensitivity."""
    if not e_c > 0 or not omega_noise > 0:
        raise DomainError("e_c and omega_noise must be positive")
    mean, _ = converged_mean_sensitivity(config, grid_n)
    return e_c / omega_noise * mean


def edge_phases(config):
    """Phases (mod 2*pi) at which some tap's correlation has an edge."""
    edges = np.concatenate([config.tap_shifts - 0.5 * math.pi, config.tap_shifts + 0.5 * math.pi])
    return np.unique(np.round(np.mod(edges, TWO_PI), 12))


def sensitive_split(config, grid_n=1 << 16):
    """Share of the sensitivity integral inside the edge windows, and the
    share of the range those windows cover.

    Each edge contributes a window of width 4*sigma_eff centred on it.
    """
    if not config.is_pulsed:
        raise DomainError("sensitive windows are defined for the pulsed coding")
    d = _grid(config, grid_n)
    prof = local_sensitivity(d, config)
    phase = 2.0 * config.omega * d / SPEED_OF_LIGHT
    half = 0.5 * sensitive_range(config)[0]
    inside = np.zeros(d.shape, bool)
    for e in edge_phases(config):
        dist = np.abs(np.mod(phase - e + math.pi, TWO_PI) - math.pi)
        inside |= dist <= half
    return float(prof[inside].sum() / prof.sum()), float(np.mean(inside))


@dataclass
class PrecisionReport:
    chi_bar: float
    depths: np.ndarray
    sensitivity_profile: np.ndarray
    config_summary: dict
    rows: list = field(default_factory=list)

    @property
    def peak_sensitivity(self):
        return float(np.max(self.sensitivity_profile))


def precision_report(config, e_c, omega_noise, grid_n=4096):
    d = _grid(config, grid_n)
    prof = local_sensitivity(d, config)
    return PrecisionReport(depth_precision_measure(config, e_c, omega_noise, grid_n), d, prof,
                           config.describe())


COMPARE_HEADER = ("mode", "noise", "trials", "rms_doi_m", "rms_full_m", "valid_fraction",
                  "chi_bar", "peak_sensitivity", "sensitive_fraction")


@dataclass
class Comparison:
    rows: list
    precision: dict
    doi: float
    header: tuple = COMPARE_HEADER


def _rms(values):
    values = np.asarray(values)
    return float(np.sqrt(np.mean(values * values))) if values.size else float("nan")


def compare_modes(scene, noise_grid, modes=MODES, trials=30, doi=None, nu=10e6, fwhm=500e-12,
                  sigma_d=0.0774, exposure=1e-3, seed=0, table=None):
    """Monte-Carlo depth error of each mode at each relative noise level.

    Both modes run at unit average optical power with the same exposure,
    so one relative noise level is the same absolute tap noise for both.
    ``rms_doi_m`` pools pixels whose true depth lies within the pulsed
    sensitive range around the DOI; ``rms_full_m`` pools every valid pixel.
    """
    for m in modes:
        if m not in MODES:
            raise DomainError(f"unknown mode {m!r}")
    pulsed = pulsed_coding(nu, fwhm, sigma_d, UNIT_AVERAGE_POWER)
    sine = sinusoid_coding(nu)
    if doi is None:
        doi = float(np.median(scene.depth))
    half_range = 0.5 * sensitive_range(pulsed)[1]
    near = np.abs(scene.depth - doi) <= half_range
    pulsed = pulsed.with_theta_g(doi_to_global_shift(doi, pulsed))
    codings = {"pctof": pulsed, "sinusoid": sine}
    if "pctof" in modes and table is None:
        table = build_calibration(doi, AcquisitionConfig(pulsed, exposure), resolution=scene.resolution)

    e_c = float(np.mean(scene.albedo))
    precision = {}
    rows = []
    for mode in sorted(modes):
        coding = codings[mode]
        base = AcquisitionConfig(coding, exposure, seed=seed)
        chi_unit = None
        for noise in sorted(float(v) for v in noise_grid):
            acq = base.relative_noise(noise) if noise > 0 else base.with_noise(NoiseModel())
            err_near, err_all, valid = [], [], []
            for t in range(trials):
                frame = render_taps(scene, acq.with_seed(seed + t), frame_index=t)
                dm = pctof_depth(frame, table, doi) if mode == "pctof" else sinusoid_depth(frame)
                diff = dm.depth - scene.depth
                # distances are compared modulo the unambiguity range
                r = coding.unambiguity_range()
                diff = np.mod(diff + 0.5 * r, r) - 0.5 * r
                err_all.append(diff[dm.valid])
                err_near.append(diff[dm.valid & near])
                valid.append(dm.valid_fraction)
            if chi_unit is None:
                rep = precision_report(coding, e_c * base.periods, 1.0)
                precision[mode] = rep
                chi_unit = rep.chi_bar
            omega = acq.noise.total_sigma(coding.k_taps)
            chi = chi_unit / omega if omega > 0 else float("inf")
            frac = sensitive_split(coding)[1] if coding.is_pulsed else 1.0
            rows.append((mode, noise, trials, _rms(np.concatenate(err_near)), _rms(np.concatenate(err_all)),
                         float(np.mean(valid)), chi, precision[mode].peak_sensitivity, frac))
    for rep in precision.values():
        rep.rows = [r for r in rows]
    return Comparison(rows, precision, doi)
