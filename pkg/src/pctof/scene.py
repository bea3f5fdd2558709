"""Synthetic ground-truth scenes authored directly as per-pixel maps."""
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .errors import DomainError
from .signal_model import SPEED_OF_LIGHT

DEFAULT_RESOLUTION = (160, 120)
DEFAULT_NU = 10e6


def _range_for(nu):
    return SPEED_OF_LIGHT / (2.0 * nu)


def _resolution(resolution):
    w, h = (int(v) for v in resolution)
    if w < 1 or h < 1:
        raise DomainError(f"resolution must be at least 1x1, got {w}x{h}")
    return w, h


@dataclass(frozen=True, eq=False)
class SceneFrame:
    """Depth (m), modulated-light scale ``albedo`` and ``ambient`` per pixel.

    Depth is stored as a base map plus the rail translations applied to
    it.  Their sum is exactly rounded, so a translation followed by its
    reverse restores the original map bit for bit.
    """

    base_depth: np.ndarray
    albedo: np.ndarray
    ambient: np.ndarray
    range_limit: float
    translations: tuple = ()

    def __post_init__(self):
        shapes = {np.shape(self.base_depth), np.shape(self.albedo), np.shape(self.ambient)}
        if len(shapes) != 1 or np.ndim(self.base_depth) != 2:
            raise DomainError("depth, albedo and ambient must be 2-D maps of one shape")
        for name in ("base_depth", "albedo", "ambient"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if np.any(~np.isfinite(self.albedo)) or np.any(self.albedo < 0):
            raise DomainError("albedo must be finite and non-negative")
        if np.any(~np.isfinite(self.ambient)) or np.any(self.ambient < 0):
            raise DomainError("ambient must be finite and non-negative")
        d = self.depth
        if np.any(~np.isfinite(d)) or np.any(d < 0) or np.any(d >= self.range_limit):
            raise DomainError(
                f"depths must lie in [0, {self.range_limit:.6g}) m; got [{d.min():.6g}, {d.max():.6g}]")

    @property
    def offset(self):
        return math.fsum(self.translations)

    @property
    def depth(self):
        off = self.offset
        return self.base_depth + off if off else self.base_depth

    @property
    def height(self):
        return self.base_depth.shape[0]

    @property
    def width(self):
        return self.base_depth.shape[1]

    @property
    def resolution(self):
        return self.width, self.height

    def __eq__(self, other):
        if not isinstance(other, SceneFrame):
            return NotImplemented
        return (self.range_limit == other.range_limit
                and np.array_equal(self.depth, other.depth)
                and np.array_equal(self.albedo, other.albedo)
                and np.array_equal(self.ambient, other.ambient))

    __hash__ = None


def _maps(depth, albedo, ambient, shape):
    return (np.broadcast_to(np.asarray(depth, dtype=np.float64), shape).copy(),
            np.full(shape, float(albedo)) if np.ndim(albedo) == 0 else np.asarray(albedo, dtype=np.float64),
            np.full(shape, float(ambient)) if np.ndim(ambient) == 0 else np.asarray(ambient, dtype=np.float64))


def make_plane(depth, albedo=1.0, ambient=0.0, resolution=DEFAULT_RESOLUTION, nu=DEFAULT_NU):
    w, h = _resolution(resolution)
    if depth < 0:
        raise DomainError("depth must be non-negative")
    d, a, e = _maps(depth, albedo, ambient, (h, w))
    return SceneFrame(d, a, e, _range_for(nu))


def make_stairs(base_depth, step_height, n_steps, step_width_px, resolution=DEFAULT_RESOLUTION,
                albedo=1.0, ambient=0.0, nu=DEFAULT_NU):
    """Base region on the left, then ``n_steps`` bands rising by ``step_height``.

    The rightmost ``n_steps * step_width_px`` columns hold the steps, so the
    base region needs at least one column: ``n_steps * step_width_px < width``.
    """
    w, h = _resolution(resolution)
    if n_steps < 0 or step_width_px < 1:
        raise DomainError("n_steps must be >= 0 and step_width_px >= 1")
    if n_steps == 0:
        return make_plane(base_depth, albedo, ambient, resolution, nu)
    if not step_height > 0:
        raise DomainError("step_height must be positive")
    if n_steps * step_width_px >= w:
        raise DomainError(
            f"{n_steps} steps of {step_width_px} px leave no base region in {w} columns")
    start = w - n_steps * step_width_px
    cols = np.arange(w)
    level = np.where(cols < start, 0, (cols - start) // step_width_px + 1)
    row = base_depth + step_height * level
    d, a, e = _maps(np.broadcast_to(row, (h, w)), albedo, ambient, (h, w))
    return SceneFrame(d, a, e, _range_for(nu))


def make_ramp(base_depth, rise, run_px, resolution=DEFAULT_RESOLUTION, albedo=1.0, ambient=0.0,
              nu=DEFAULT_NU, start_px=0):
    """Linear rise over ``run_px`` columns starting at ``start_px``, flat after."""
    w, h = _resolution(resolution)
    if run_px < 1:
        raise DomainError("run_px must be >= 1")
    j = np.clip(np.arange(w) - start_px, 0, run_px - 1)
    row = base_depth + rise * j / max(run_px - 1, 1)
    d, a, e = _maps(np.broadcast_to(row, (h, w)), albedo, ambient, (h, w))
    return SceneFrame(d, a, e, _range_for(nu))


def translate_depth(scene, offset):
    """Move the whole scene by ``offset`` meters along the optical axis."""
    return SceneFrame(scene.base_depth, scene.albedo, scene.ambient, scene.range_limit,
                      scene.translations + (float(offset),))


def stack_rows(top, bottom):
    """Scene whose upper half comes from ``top`` and lower half from ``bottom``."""
    if top.resolution != bottom.resolution or top.range_limit != bottom.range_limit:
        raise DomainError("scenes must share resolution and range")
    cut = top.height // 2
    pick = lambda a, b: np.vstack([a[:cut], b[cut:]])  # noqa: E731
    return SceneFrame(pick(top.depth, bottom.depth), pick(top.albedo, bottom.albedo),
                      pick(top.ambient, bottom.ambient), top.range_limit)


STAIR_PRESETS = {"stairs-1mm": 1e-3, "stairs-1.5mm": 1.5e-3, "stairs-2mm": 2e-3,
                 "stairs-3mm": 3e-3, "stairs-5mm": 5e-3}
PRESETS = ("plane",) + tuple(STAIR_PRESETS) + ("ramps",)


def make_preset(name, base_depth=0.5, resolution=DEFAULT_RESOLUTION, nu=DEFAULT_NU, albedo=1.0, ambient=0.0):
    """Named scenes: ``plane``, ``stairs-<h>mm`` (4 steps) and ``ramps``.

    ``ramps`` puts two 10 mm ramps of different length in the upper and
    lower halves.  On very narrow sensors the step count shrinks so the
    geometry still fits.
    """
    w, _ = _resolution(resolution)
    if name == "plane":
        return make_plane(base_depth, albedo, ambient, resolution, nu)
    if name in STAIR_PRESETS:
        n = min(4, w - 1)
        width = w // (n + 1) if n else 1
        return make_stairs(base_depth, STAIR_PRESETS[name], n, width, resolution, albedo, ambient, nu)
    if name == "ramps":
        long_run = max(w // 2, 1)
        short_run = max(w // 4, 1)
        start = w // 4
        top = make_ramp(base_depth, 0.01, short_run, resolution, albedo, ambient, nu, start)
        bottom = make_ramp(base_depth, 0.01, long_run, resolution, albedo, ambient, nu, start)
        return stack_rows(top, bottom)
    raise DomainError(f"unknown scene preset {name!r}; choose from {', '.join(PRESETS)}")


def export_scene(scene, directory, fmt="csv"):
    """Write depth/albedo/ambient maps as ``<name>.csv`` or ``<name>.pfm``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    writer = io.write_csv_map if fmt == "csv" else io.write_pfm
    paths = []
    for name, arr in (("depth", scene.depth), ("albedo", scene.albedo), ("ambient", scene.ambient)):
        p = directory / f"{name}.{fmt}"
        writer(p, arr)
        paths.append(p)
    return paths


def import_scene(directory, nu=DEFAULT_NU, fmt="csv"):
    directory = Path(directory)
    reader = io.read_csv_map if fmt == "csv" else io.read_pfm
    return SceneFrame(*(reader(directory / f"{n}.{fmt}") for n in ("depth", "albedo", "ambient")),
                      range_limit=_range_for(nu))
