"""Command-line front end: ``pctof simulate|calibrate|measure|validate|compare``."""
import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .acquisition import AcquisitionConfig, NoiseModel, export_taps, rail_offsets, render_taps
from .analysis import compare_modes
from .calibration import build_calibration
from .calibration_io import config_hash, load_calibration, save_calibration
from .config import DEFAULTS, load_config, with_overrides
from .errors import (
    CalibrationError,
    CompatibilityError,
    ConfigError,
    DomainError,
    EmptyMetricError,
    FormatError,
    ModelValidityError,
    PCToFError,
)
from .reconstruction import depth_slice, export_depth_map, pctof_depth, sinusoid_depth
from .scene import export_scene, make_plane, make_preset, translate_depth
from .signal_model import TWO_PI, UNIT_AVERAGE_POWER, doi_to_global_shift, pulsed_coding, sinusoid_coding

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_CALIBRATION = 3
EXIT_IO = 4
CALIBRATION_FILE = "calibration.pctofcal"


class _Setup(Exception):
    """Wraps domain errors raised while turning a config into objects."""


def _codings(cfg):
    try:
        return (pulsed_coding(cfg.frequency, cfg.pulse_fwhm, cfg.sigma_d, UNIT_AVERAGE_POWER),
                sinusoid_coding(cfg.frequency))
    except (DomainError, ModelValidityError) as exc:
        raise ConfigError(f"invalid coding parameters: {exc}") from exc


def _acq(coding, cfg, noise=None):
    base = AcquisitionConfig(coding, cfg.exposure, seed=cfg.seed)
    level = cfg.noise if noise is None else noise
    if level == 0 and not cfg.shot:
        return base.with_noise(NoiseModel())
    return base.relative_noise(level, shot_enabled=cfg.shot, shot_scale=cfg.shot_scale)


def _scene(cfg):
    try:
        return make_preset(cfg.scene, cfg.base_depth, cfg.resolution, cfg.frequency)
    except DomainError as exc:
        raise ConfigError(f"scene: {exc}") from exc


def _write_manifest(out, command, cfg, extra=None):
    files = sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    echo = cfg.as_dict()
    manifest = {
        "tool": "pctof",
        "version": __version__,
        "command": command,
        "seed": cfg.seed,
        "config": echo,
        "config_sha256": config_hash(echo),
        "outputs": files,
    }
    if extra:
        manifest["results"] = extra
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def cmd_simulate(cfg, out, args):
    pulsed, sine = _codings(cfg)
    scene = _scene(cfg)
    doi = cfg.explicit_doi() if cfg.explicit_doi() is not None else cfg.base_depth
    export_scene(scene, out / "truth", "csv")
    export_scene(scene, out / "truth", "pfm")
    export_taps(render_taps(scene, _acq(sine, cfg)), out / "sinusoid")
    pulsed = pulsed.with_theta_g(doi_to_global_shift(doi, pulsed))
    export_taps(render_taps(scene, _acq(pulsed, cfg), frame_index=1), out / "pctof")
    _write_manifest(out, "simulate", cfg, {"doi_m": doi})
    print(f"simulated {cfg.scene} at {cfg.width}x{cfg.height} into {out}")


def cmd_calibrate(cfg, out, args):
    pulsed, _ = _codings(cfg)
    acq = _acq(pulsed, cfg)
    table = build_calibration(cfg.reference_depth, acq, cfg.resolution, doi=cfg.explicit_doi(),
                              coarse_steps=cfg.coarse_steps, step=TWO_PI / 2 ** cfg.phase_bits)
    save_calibration(table, out / CALIBRATION_FILE)
    widths = (table.interval_hi - table.interval_lo)[table.valid]
    mask = table.mask[table.valid]
    io.write_table(out / "calibration_summary.csv", ("metric", "value"), [
        ("valid_fraction", table.valid_fraction),
        ("zero_phase_median_rad", table.zero_phase_median),
        ("mask_rms_rad", float(np.sqrt(np.mean(mask ** 2)))),
        ("interval_width_mean_rad", float(np.mean(widths))),
        ("interval_width_min_rad", float(np.min(widths))),
        ("interval_width_max_rad", float(np.max(widths))),
        ("fine_samples", int(table.xs.size)),
    ])
    lo, hi = float(np.min(mask)), float(np.max(mask))
    if hi == lo:
        hi = lo + 1e-12
    counts, edges = np.histogram(mask, bins=32, range=(lo, hi))
    io.write_table(out / "zero_phase_histogram.csv", ("mask_lo_rad", "mask_hi_rad", "pixels"),
                   [(float(a), float(b), int(c)) for a, b, c in zip(edges[:-1], edges[1:], counts)])
    _write_manifest(out, "calibrate", cfg, {"valid_fraction": table.valid_fraction})
    print(f"calibrated {table.valid_fraction:.1%} of pixels; table written to {out / CALIBRATION_FILE}")


def _calibration_path(args, out):
    path = Path(args.calibration) if args.calibration else out / CALIBRATION_FILE
    if not path.exists():
        raise FormatError(f"{path}: calibration file not found (run 'pctof calibrate' or pass --calibration)")
    return path


def _slice_row(h):
    row = h // 2
    return row, min(2, row, h - 1 - row)


def cmd_measure(cfg, out, args):
    pulsed, sine = _codings(cfg)
    table = load_calibration(_calibration_path(args, out))
    scene = _scene(cfg)
    coarse = sinusoid_depth(render_taps(scene, _acq(sine, cfg)))
    doi = cfg.explicit_doi()
    if doi is None:
        if not np.any(coarse.valid):
            raise EmptyMetricError("coarse measurement has no valid pixels to pick a DOI from")
        doi = float(np.median(coarse.depth[coarse.valid]))
    pulsed = pulsed.with_theta_g(doi_to_global_shift(doi, pulsed))
    fine = pctof_depth(render_taps(scene, _acq(pulsed, cfg), frame_index=1), table, doi)
    export_depth_map(coarse, out, "coarse")
    export_depth_map(fine, out, "pctof")
    io.write_csv_map(out / "difference.csv", fine.depth - coarse.depth)
    row, hw = _slice_row(scene.height)
    truth = scene.depth[row]
    prof_c, prof_f = depth_slice(coarse, row, hw), depth_slice(fine, row, hw)
    io.write_table(out / "slices.csv", ("column", "truth_m", "coarse_m", "pctof_m"),
                   [(j, float(truth[j]), float(prof_c[j]), float(prof_f[j])) for j in range(scene.width)])
    stats = [("doi_m", doi), ("coarse_valid_fraction", coarse.valid_fraction),
             ("pctof_valid_fraction", fine.valid_fraction)]
    for name, dm in (("coarse", coarse), ("pctof", fine)):
        err = (dm.depth - scene.depth)[dm.valid]
        stats.append((f"{name}_rms_m", float(np.sqrt(np.mean(err ** 2))) if err.size else float("nan")))
    io.write_table(out / "measure_summary.csv", ("metric", "value"), stats)
    _write_manifest(out, "measure", cfg, {"doi_m": doi})
    print(f"DOI {doi:.6f} m; pulsed map valid on {fine.valid_fraction:.1%} of pixels")


def cmd_validate(cfg, out, args):
    pulsed, _ = _codings(cfg)
    table = load_calibration(_calibration_path(args, out))
    doi = cfg.explicit_doi() if cfg.explicit_doi() is not None else table.reference_depth
    plane = make_plane(doi, resolution=cfg.resolution, nu=cfg.frequency)
    acq = _acq(pulsed.with_theta_g(doi_to_global_shift(doi, pulsed)), cfg)
    rows, errors, pixel_sq, pixel_n = [], [], 0.0, 0
    for k, d in enumerate(rail_offsets(cfg.rail_half_span, cfg.rail_step)):
        scene = translate_depth(plane, d)
        dm = pctof_depth(render_taps(scene, acq, frame_index=k), table, doi)
        truth = doi + d
        in_range = dm.valid_fraction >= 0.5
        mean = float(np.mean(dm.depth[dm.valid])) if np.any(dm.valid) else float("nan")
        if in_range:
            errors.append(mean - truth)
            e = dm.depth[dm.valid] - truth
            pixel_sq += float(np.sum(e * e))
            pixel_n += e.size
        rows.append((k, d, truth, mean, mean - truth, dm.valid_fraction, int(in_range)))
    io.write_table(out / "validation.csv",
                   ("index", "offset_m", "truth_m", "mean_depth_m", "error_m", "valid_fraction", "in_range"),
                   rows)
    rms = float(np.sqrt(np.mean(np.square(errors)))) if errors else float("nan")
    pixel_rms = math.sqrt(pixel_sq / pixel_n) if pixel_n else float("nan")
    flagged = sum(1 for r in rows if not r[-1])
    io.write_table(out / "validation_summary.csv", ("metric", "value"), [
        ("rms_m", rms), ("pixel_rms_m", pixel_rms), ("offsets_in_range", len(rows) - flagged),
        ("offsets_flagged", flagged)])
    _write_manifest(out, "validate", cfg, {"rms_m": rms, "offsets_flagged": flagged})
    print(f"rail validation: RMS {rms * 1e3:.4f} mm over {len(rows) - flagged} offsets "
          f"({flagged} flagged out of range)")


def cmd_compare(cfg, out, args):
    scene = _scene(cfg)
    table = load_calibration(args.calibration) if args.calibration else None
    result = compare_modes(scene, cfg.noise_grid, trials=cfg.trials, doi=cfg.explicit_doi(),
                           nu=cfg.frequency, fwhm=cfg.pulse_fwhm, sigma_d=cfg.sigma_d,
                           exposure=cfg.exposure, seed=cfg.seed, table=table)
    io.write_table(out / "compare.csv", result.header, result.rows)
    (out / "compare.txt").write_text(io.format_text_table(result.header, result.rows))
    for mode, rep in sorted(result.precision.items()):
        io.write_table(out / f"sensitivity_{mode}.csv", ("depth_m", "sensitivity_per_m"),
                       [(float(d), float(s)) for d, s in zip(rep.depths[::16], rep.sensitivity_profile[::16])])
    _write_manifest(out, "compare", cfg, {"doi_m": result.doi})
    print(io.format_text_table(result.header, result.rows), end="")


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "measure": cmd_measure,
    "validate": cmd_validate,
    "compare": cmd_compare,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration (defaults if omitted)")
    common.add_argument("--seed", type=int, metavar="N", help="override run.seed")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    common.add_argument("--doi", type=float, metavar="METERS", help="override run.doi_m")
    common.add_argument("--noise", type=float, metavar="REAL",
                        help="per-tap Gaussian noise as a fraction of full-scale tap intensity")
    common.add_argument("--scene", metavar="PRESET", help="override scene.preset")
    common.add_argument("--calibration", metavar="PATH",
                        help=f"calibration container (default: <out>/{CALIBRATION_FILE})")
    parser = argparse.ArgumentParser(prog="pctof", description="Pulsed correlation time-of-flight laboratory")
    parser.add_argument("--version", action="version", version=f"pctof {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "render tap frames and ground truth for a scene preset",
        "calibrate": "build a per-pixel calibration table from a simulated flat target",
        "measure": "coarse sinusoid pass, then a pulsed pass around the DOI",
        "validate": "rail sweep of a flat target against a calibration",
        "compare": "Monte-Carlo comparison of both modes over a noise grid",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(args):
    cfg = load_config(args.config) if args.config else DEFAULTS
    return with_overrides(cfg, seed=args.seed, doi=args.doi, noise=args.noise, scene=args.scene)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        frac = "" if exc.invalid_fraction is None else f" (invalid pixels: {exc.invalid_fraction:.1%})"
        print(f"calibration failed: {exc}{frac}", file=sys.stderr)
        return EXIT_CALIBRATION
    except CompatibilityError as exc:
        print(f"calibration mismatch: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (FormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PCToFError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
