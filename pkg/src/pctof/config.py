"""Run configuration: a versioned TOML file, overridable from the command line.

Every field in :data:`SCHEMA` must be present in a config file; running
without one uses :data:`DEFAULTS`.  The defaults mirror a 160x120, 10 MHz,
500 ps FWHM, 1 ms exposure sensor.
"""
import sys
from dataclasses import asdict, dataclass, replace

from .errors import ConfigError
from .scene import PRESETS

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

SCHEMA_VERSION = 1

# (section, key) -> (RunConfig attribute, type)
SCHEMA = {
    ("sensor", "width"): ("width", int),
    ("sensor", "height"): ("height", int),
    ("coding", "frequency_hz"): ("frequency", float),
    ("coding", "pulse_fwhm_s"): ("pulse_fwhm", float),
    ("coding", "sigma_d_rad"): ("sigma_d", float),
    ("coding", "exposure_s"): ("exposure", float),
    ("noise", "relative"): ("noise", float),
    ("noise", "shot"): ("shot", bool),
    ("noise", "shot_scale"): ("shot_scale", float),
    ("run", "seed"): ("seed", int),
    ("run", "doi_m"): ("doi", object),
    ("scene", "preset"): ("scene", str),
    ("scene", "base_depth_m"): ("base_depth", float),
    ("calibration", "reference_depth_m"): ("reference_depth", float),
    ("calibration", "coarse_steps"): ("coarse_steps", int),
    ("calibration", "phase_bits"): ("phase_bits", int),
    ("validation", "half_span_m"): ("rail_half_span", float),
    ("validation", "step_m"): ("rail_step", float),
    ("compare", "noise_grid"): ("noise_grid", list),
    ("compare", "trials"): ("trials", int),
}


@dataclass(frozen=True)
class RunConfig:
    width: int = 160
    height: int = 120
    frequency: float = 10e6
    pulse_fwhm: float = 500e-12
    sigma_d: float = 0.0774
    exposure: float = 1e-3
    noise: float = 0.0
    shot: bool = False
    shot_scale: float = 1.0
    seed: int = 0
    doi: object = "auto"
    scene: str = "stairs-2mm"
    base_depth: float = 0.5
    reference_depth: float = 0.5
    coarse_steps: int = 512
    phase_bits: int = 14
    rail_half_span: float = 0.025
    rail_step: float = 0.001
    noise_grid: tuple = (0.0, 0.0005, 0.001, 0.002)
    trials: int = 30

    def __post_init__(self):
        for name in ("width", "height", "coarse_steps", "phase_bits", "trials"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("frequency", "pulse_fwhm", "exposure", "rail_step", "shot_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("sigma_d", "noise", "base_depth", "reference_depth", "rail_half_span"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.scene not in PRESETS:
            raise ConfigError(f"scene.preset {self.scene!r} is not one of {', '.join(PRESETS)}")
        if not (self.doi == "auto" or (isinstance(self.doi, (int, float)) and not isinstance(self.doi, bool)
                                       and self.doi >= 0)):
            raise ConfigError("run.doi_m must be a non-negative number or \"auto\"")
        if any(v < 0 for v in self.noise_grid):
            raise ConfigError("compare.noise_grid entries must be non-negative")
        object.__setattr__(self, "noise_grid", tuple(float(v) for v in self.noise_grid))

    @property
    def resolution(self):
        return self.width, self.height

    def explicit_doi(self):
        return None if self.doi == "auto" else float(self.doi)

    def as_dict(self):
        d = asdict(self)
        d["noise_grid"] = list(self.noise_grid)
        return d

    def to_toml(self):
        sections = {}
        for (sec, key), (attr, _) in SCHEMA.items():
            sections.setdefault(sec, []).append((key, getattr(self, attr)))
        lines = [f"schema_version = {SCHEMA_VERSION}", ""]
        for sec, items in sections.items():
            lines.append(f"[{sec}]")
            for key, v in items:
                lines.append(f"{key} = {_toml_value(v)}")
            lines.append("")
        return "\n".join(lines)


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


DEFAULTS = RunConfig()


def _coerce(field, value, kind):
    if kind is object:
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{field} must be true or false")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError(f"{field} must be an array")
        return tuple(_coerce(field, v, float) for v in value)
    if kind in (int, float) and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ConfigError(f"{field} must be a number")
    if kind is int and int(value) != value:
        raise ConfigError(f"{field} must be an integer")
    if kind is str and not isinstance(value, str):
        raise ConfigError(f"{field} must be a string")
    return kind(value)


def parse_config(data, source="<config>"):
    """Build a :class:`RunConfig` from a parsed TOML mapping."""
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{source}: schema_version must be {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    values = {}
    for (sec, key), (attr, kind) in SCHEMA.items():
        field = f"{sec}.{key}"
        section = data.get(sec)
        if not isinstance(section, dict) or key not in section:
            raise ConfigError(f"{source}: missing required field '{field}'")
        values[attr] = _coerce(field, section[key], kind)
    return RunConfig(**values)


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})") from exc
    return parse_config(data, str(path))


def with_overrides(cfg, **overrides):
    """Apply command-line overrides whose value is not None."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **changes) if changes else cfg
