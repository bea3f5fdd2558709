import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from pctof import cli
from pctof.config import DEFAULTS, RunConfig, SCHEMA, load_config, parse_config, with_overrides
from pctof.errors import ConfigError

if __import__("sys").version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TINY = replace(DEFAULTS, width=24, height=12, trials=2, noise_grid=(0.0, 0.001), rail_half_span=0.005,
               coarse_steps=256)


def write_config(path, cfg):
    path.write_text(cfg.to_toml())
    return str(path)


def read_summary(path):
    with open(path) as fh:
        return {row["metric"]: row["value"] for row in csv.DictReader(fh)}


def run(tmp_path, command, cfg=TINY, *extra, out="out"):
    conf = write_config(tmp_path / "run.toml", cfg)
    outdir = tmp_path / out
    code = cli.main([command, "--config", conf, "--out", str(outdir), *extra])
    return code, outdir


# -- configuration ---------------------------------------------------------

def test_defaults_match_hardware_table():
    assert DEFAULTS.resolution == (160, 120)
    assert DEFAULTS.frequency == 10e6
    assert DEFAULTS.pulse_fwhm == 500e-12
    assert DEFAULTS.exposure == 1e-3


def test_shipped_config_equals_defaults():
    assert load_config("configs/default.toml") == DEFAULTS


def test_toml_round_trip():
    cfg = replace(DEFAULTS, width=7, doi=0.42, noise=0.003, shot=True, noise_grid=(0.0, 0.01))
    assert parse_config(tomllib.loads(cfg.to_toml())) == cfg


@pytest.mark.parametrize("section,key", sorted(SCHEMA))
def test_missing_field_is_named(section, key):
    data = tomllib.loads(DEFAULTS.to_toml())
    del data[section][key]
    with pytest.raises(ConfigError, match=rf"'{section}\.{key}'"):
        parse_config(data)


@pytest.mark.parametrize("field,value", [("width", 0), ("frequency", -1.0), ("exposure", 0.0),
                                         ("noise", -0.1), ("scene", "cube"), ("doi", "near")])
def test_invalid_values_rejected(field, value):
    with pytest.raises(ConfigError):
        RunConfig(**{field: value})


def test_wrong_type_and_schema_version():
    data = tomllib.loads(DEFAULTS.to_toml())
    data["sensor"]["width"] = "wide"
    with pytest.raises(ConfigError, match="sensor.width"):
        parse_config(data)
    data = tomllib.loads(DEFAULTS.to_toml())
    data["schema_version"] = 99
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(data)


def test_overrides_skip_none():
    cfg = with_overrides(DEFAULTS, seed=5, doi=None, noise=0.01)
    assert cfg.seed == 5 and cfg.noise == 0.01 and cfg.doi == DEFAULTS.doi
    assert with_overrides(DEFAULTS) is DEFAULTS


def test_unreadable_and_malformed_config(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("schema_version = [")
    assert cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_missing_field_exit_code(tmp_path, capsys):
    text = DEFAULTS.to_toml().replace("exposure_s = 0.001\n", "")
    p = tmp_path / "c.toml"
    p.write_text(text)
    assert cli.main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "coding.exposure_s" in capsys.readouterr().err


# -- simulate --------------------------------------------------------------

def test_simulate_writes_outputs_and_stable_manifest(tmp_path):
    cfg = replace(TINY, scene="stairs-5mm")
    code, out = run(tmp_path, "simulate", cfg)
    assert code == 0
    for rel in ("truth/depth.csv", "truth/depth.pfm", "sinusoid", "pctof", "manifest.json"):
        assert (out / rel).exists()
    m1 = json.loads((out / "manifest.json").read_text())
    code, out2 = run(tmp_path, "simulate", cfg, out="again")
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1["config_sha256"] == m2["config_sha256"]
    assert m1["outputs"] == m2["outputs"]
    for rel in m1["outputs"]:
        assert (out / rel).read_bytes() == (out2 / rel).read_bytes(), rel


def test_seed_override_changes_hash(tmp_path):
    cfg = replace(TINY, noise=0.01)
    _, a = run(tmp_path, "simulate", cfg, out="a")
    _, b = run(tmp_path, "simulate", cfg, "--seed", "3", out="b")
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert ma["config_sha256"] != mb["config_sha256"] and mb["seed"] == 3


def test_one_pixel_sensor_runs(tmp_path):
    cfg = replace(TINY, width=1, height=1, scene="stairs-2mm")
    code, out = run(tmp_path, "simulate", cfg)
    assert code == 0
    assert (out / "truth" / "depth.csv").exists()


def test_bad_coding_is_config_error(tmp_path):
    code, _ = run(tmp_path, "simulate", replace(TINY, pulse_fwhm=60e-9))
    assert code == cli.EXIT_CONFIG


# -- calibrate / measure / validate ----------------------------------------

@pytest.fixture(scope="module")
def calibrated(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cal")
    code, out = run(tmp, "calibrate", TINY)
    assert code == 0
    return tmp, out


def test_calibrate_noise_free_all_valid(calibrated):
    _, out = calibrated
    s = read_summary(out / "calibration_summary.csv")
    assert float(s["valid_fraction"]) == 1.0
    assert (out / "zero_phase_histogram.csv").exists()
    assert (out / cli.CALIBRATION_FILE).stat().st_size > 0


def test_calibrate_noisy_valid_fraction(tmp_path):
    # tap noise of 5 % of a tap's swing across its edge
    code, out = run(tmp_path, "calibrate", replace(TINY, width=32, height=24, coarse_steps=512, noise=0.05))
    assert code == 0
    assert float(read_summary(out / "calibration_summary.csv")["valid_fraction"]) >= 0.95


def test_calibrate_reference_outside_range(tmp_path, capsys):
    code, _ = run(tmp_path, "calibrate", replace(TINY, reference_depth=1.0, doi=0.5))
    assert code == cli.EXIT_CALIBRATION
    assert "invalid pixels: 100.0%" in capsys.readouterr().err


def test_measure_outputs_and_default_doi(calibrated):
    tmp, cal_out = calibrated
    code, out = run(tmp, "measure", TINY, "--calibration", str(cal_out / cli.CALIBRATION_FILE), out="m")
    assert code == 0
    for name in ("coarse.csv", "pctof.csv", "pctof.pfm", "pctof.pgm", "difference.csv", "slices.csv"):
        assert (out / name).exists(), name
    s = read_summary(out / "measure_summary.csv")
    truth = cli.make_preset(TINY.scene, TINY.base_depth, TINY.resolution)
    assert float(s["doi_m"]) == pytest.approx(float(np.median(truth.depth)), abs=1e-9)
    assert float(s["pctof_rms_m"]) < 1e-6


def test_measure_reruns_are_byte_identical(calibrated):
    tmp, cal_out = calibrated
    cfg = replace(TINY, noise=0.002)
    cal = str(cal_out / cli.CALIBRATION_FILE)
    _, a = run(tmp, "measure", cfg, "--calibration", cal, out="ra")
    _, b = run(tmp, "measure", cfg, "--calibration", cal, out="rb")
    for name in ("coarse.csv", "pctof.csv", "difference.csv", "slices.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_measure_corrupt_calibration(calibrated, capsys):
    tmp, cal_out = calibrated
    raw = bytearray((cal_out / cli.CALIBRATION_FILE).read_bytes())
    raw[40] ^= 0xFF
    bad = tmp / "corrupt.pctofcal"
    bad.write_bytes(bytes(raw))
    code, _ = run(tmp, "measure", TINY, "--calibration", str(bad), out="c")
    assert code == cli.EXIT_IO
    assert "byte " in capsys.readouterr().err


def test_measure_missing_calibration(tmp_path, capsys):
    code, _ = run(tmp_path, "measure", TINY)
    assert code == cli.EXIT_IO
    assert "not found" in capsys.readouterr().err


def test_measure_incompatible_calibration(calibrated):
    tmp, cal_out = calibrated
    cfg = replace(TINY, width=TINY.width + 2)
    code, _ = run(tmp, "measure", cfg, "--calibration", str(cal_out / cli.CALIBRATION_FILE), out="x")
    assert code == cli.EXIT_CALIBRATION


def test_validate_noise_free(calibrated):
    tmp, cal_out = calibrated
    code, out = run(tmp, "validate", TINY, "--calibration", str(cal_out / cli.CALIBRATION_FILE), out="v")
    assert code == 0
    s = read_summary(out / "validation_summary.csv")
    assert float(s["rms_m"]) <= 0.05e-3
    assert int(s["offsets_flagged"]) == 0


def test_validate_flags_offsets_beyond_range(calibrated):
    tmp, cal_out = calibrated
    cfg = replace(TINY, rail_half_span=0.4, rail_step=0.1)
    code, out = run(tmp, "validate", cfg, "--calibration", str(cal_out / cli.CALIBRATION_FILE), out="vf")
    assert code == 0
    with open(out / "validation.csv") as fh:
        rows = list(csv.DictReader(fh))
    flagged = [r for r in rows if r["in_range"] == "0"]
    assert flagged and all(abs(float(r["offset_m"])) > 0.15 for r in flagged)
    assert int(read_summary(out / "validation_summary.csv")["offsets_flagged"]) == len(flagged)


@pytest.mark.slow
def test_validate_one_percent_noise(tmp_path):
    cfg = replace(TINY, width=40, height=30, noise=0.01, coarse_steps=512, rail_half_span=0.025)
    code, out = run(tmp_path, "calibrate", cfg)
    assert code == 0
    code, out = run(tmp_path, "validate", cfg)
    assert code == 0
    assert float(read_summary(out / "validation_summary.csv")["rms_m"]) <= 1e-3


def test_compare_writes_report(tmp_path, capsys):
    code, out = run(tmp_path, "compare", replace(TINY, scene="stairs-5mm"))
    assert code == 0
    with open(out / "compare.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["mode"] for r in rows} == {"pctof", "sinusoid"}
    assert len(rows) == 4
    assert (out / "sensitivity_pctof.csv").exists()
    assert "pctof" in capsys.readouterr().out
