import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pctof import signal_model as sm
from pctof.acquisition import AcquisitionConfig, render_taps
from pctof.errors import CompatibilityError, DomainError, EmptyMetricError, UnsupportedCodingError
from pctof.io import read_csv_map, read_pfm, read_pgm16
from pctof.reconstruction import (
    DepthMap,
    depth_slice,
    export_depth_map,
    pctof_depth,
    rms_error,
    sinusoid_depth,
)
from pctof.scene import make_plane, make_preset, make_stairs, translate_depth

C = sm.SPEED_OF_LIGHT
SINE = AcquisitionConfig(sm.sinusoid_coding(), exposure=1e-6)


def test_sinusoid_quarter_range():
    quarter = C / (8 * 10e6)
    dm = sinusoid_depth(render_taps(make_plane(quarter, resolution=(3, 2)), SINE))
    assert np.max(np.abs(dm.depth - quarter)) <= 1e-9
    assert dm.mode == "sinusoid"


def test_sinusoid_zero_depth():
    dm = sinusoid_depth(render_taps(make_plane(0.0, resolution=(3, 2)), SINE))
    r = SINE.coding.unambiguity_range()
    assert np.all(np.minimum(dm.depth, r - dm.depth) <= 1e-9)


def test_sinusoid_full_range_sweep():
    r = SINE.coding.unambiguity_range()
    depths = r * np.arange(360) / 360
    scene_depth = np.tile(depths, (1, 1))
    from pctof.scene import SceneFrame
    scene = SceneFrame(scene_depth, np.ones_like(scene_depth), np.zeros_like(scene_depth), r)
    dm = sinusoid_depth(render_taps(scene, SINE))
    assert np.max(np.abs(dm.depth[0] - depths)) <= 1e-9
    assert np.all(np.diff(dm.depth[0]) > 0)


def test_sinusoid_with_global_shift():
    acq = AcquisitionConfig(sm.sinusoid_coding(theta_g=2.0), exposure=1e-6)
    dm = sinusoid_depth(render_taps(make_plane(7.3, resolution=(2, 2)), acq))
    np.testing.assert_allclose(dm.depth, 7.3, atol=1e-9)


@given(st.floats(0.1, 20.0), st.floats(0.0, 5.0), st.floats(0.0, 14.9))
@settings(max_examples=40)
def test_sinusoid_invariant_to_albedo_ambient(albedo, ambient, depth):
    a = sinusoid_depth(render_taps(make_plane(depth, resolution=(1, 1)), SINE)).depth
    b = sinusoid_depth(render_taps(make_plane(depth, albedo, ambient, resolution=(1, 1)), SINE)).depth
    r = SINE.coding.unambiguity_range()
    d = (a - b + r / 2) % r - r / 2
    assert np.all(np.abs(d) * 2 * SINE.coding.omega / C <= 1e-12 * max(1.0, albedo))


def test_sinusoid_refuses_pulsed_without_flag():
    taps = render_taps(make_plane(0.5, resolution=(2, 2)), AcquisitionConfig(sm.pulsed_coding()))
    with pytest.raises(UnsupportedCodingError):
        sinusoid_depth(taps)
    assert sinusoid_depth(taps, systematic_error_demo=True).mode == "sinusoid"


def test_dark_pixels_invalid():
    dm = sinusoid_depth(render_taps(make_plane(1.0, albedo=0.0, resolution=(2, 2)), SINE))
    assert not dm.valid.any() and np.all(np.isnan(dm.depth))


def _pulsed_acq(table):
    return AcquisitionConfig(table.coding)


def test_plane_at_doi(small_table):
    dm = pctof_depth(render_taps(make_plane(0.5, resolution=(12, 8)), _pulsed_acq(small_table)), small_table)
    assert dm.valid.all()
    assert np.max(np.abs(dm.depth - 0.5)) <= 5e-5


def test_five_mm_stairs(small_table):
    scene = make_stairs(0.5, 5e-3, 3, 3, resolution=(12, 8))
    dm = pctof_depth(render_taps(scene, _pulsed_acq(small_table)), small_table)
    cols = dm.depth.mean(axis=0)
    means = [cols[:3].mean(), cols[3:6].mean(), cols[6:9].mean(), cols[9:].mean()]
    np.testing.assert_allclose(means, [0.5, 0.505, 0.510, 0.515], atol=1e-4)


def test_plane_outside_sensitive_range_invalid(small_table):
    far = 0.5 + sm.sensitive_range(small_table.coding)[1]
    dm = pctof_depth(render_taps(make_plane(far, resolution=(12, 8)), _pulsed_acq(small_table)), small_table)
    assert not dm.valid.any()


@given(st.floats(-1.0, 1.0))
@settings(max_examples=20)
def test_rail_equivariance(small_table, t):
    d = t * 0.4 * sm.sensitive_range(small_table.coding)[1] / 2
    scene = make_preset("stairs-2mm", resolution=(12, 8))
    acq = _pulsed_acq(small_table)
    base = pctof_depth(render_taps(scene, acq), small_table)
    moved = pctof_depth(render_taps(translate_depth(scene, d), acq), small_table)
    np.testing.assert_allclose(moved.depth, base.depth + d, atol=5e-5)


def test_valid_pixels_inside_response_band(small_table, rng):
    acq = _pulsed_acq(small_table).relative_noise(0.05)
    scene = make_plane(0.5 + 0.3, resolution=(12, 8))
    from pctof.acquisition import raw_fraction
    taps = render_taps(scene, acq)
    dm = pctof_depth(taps, small_table)
    psi = raw_fraction(taps).psi
    lo, hi = small_table.band
    assert np.all((psi[dm.valid] >= lo[dm.valid]) & (psi[dm.valid] <= hi[dm.valid]))


def test_incompatible_table(small_table):
    taps = render_taps(make_plane(0.5, resolution=(12, 8), nu=20e6), AcquisitionConfig(sm.pulsed_coding(nu=20e6)))
    with pytest.raises(CompatibilityError):
        pctof_depth(taps, small_table)
    taps = render_taps(make_plane(0.5, resolution=(4, 4)), _pulsed_acq(small_table))
    with pytest.raises(CompatibilityError):
        pctof_depth(taps, small_table)


def test_rms_error_examples():
    truth = make_plane(0.5, resolution=(4, 3))
    exact = DepthMap(truth.depth, np.ones((3, 4), bool), "pctof")
    assert rms_error(exact, truth) == (0.0, 1.0)
    biased = DepthMap(truth.depth + 1e-3, np.ones((3, 4), bool), "pctof")
    assert rms_error(biased, truth)[0] == pytest.approx(1e-3, rel=1e-12)
    with pytest.raises(EmptyMetricError):
        rms_error(DepthMap(truth.depth, np.zeros((3, 4), bool), "pctof"), truth)


def test_depth_slice():
    d = np.arange(20.0).reshape(5, 4)
    valid = np.ones_like(d, bool)
    dm = DepthMap(d, valid, "pctof")
    np.testing.assert_array_equal(depth_slice(dm, 2, 0), d[2])
    np.testing.assert_allclose(depth_slice(dm, 2, 2), d.mean(axis=0))
    const = DepthMap(np.full((5, 4), 0.7), valid, "pctof")
    np.testing.assert_allclose(depth_slice(const, 2), 0.7)
    valid2 = valid.copy()
    valid2[:, 1] = False
    assert np.isnan(depth_slice(DepthMap(d, valid2, "pctof"), 2)[1])
    with pytest.raises(DomainError):
        depth_slice(dm, 0, 2)


def test_stairs_slice_profile(small_table):
    scene = make_stairs(0.5, 2e-3, 3, 3, resolution=(12, 8))
    dm = pctof_depth(render_taps(scene, _pulsed_acq(small_table)), small_table)
    prof = depth_slice(dm, 4)
    np.testing.assert_allclose(np.diff(prof[[0, 3, 6, 9]]), 2e-3, atol=1e-5)


def test_export(tmp_path, small_table):
    dm = pctof_depth(render_taps(make_preset("stairs-2mm", resolution=(12, 8)), _pulsed_acq(small_table)),
                     small_table)
    export_depth_map(dm, tmp_path)
    np.testing.assert_array_equal(read_csv_map(tmp_path / "depth.csv"), dm.depth)
    np.testing.assert_allclose(read_pfm(tmp_path / "depth.pfm"), dm.depth, rtol=1e-7)
    pgm = read_pgm16(tmp_path / "depth.pgm")
    np.testing.assert_allclose(pgm, dm.depth, atol=1e-6)


def test_depth_map_rejects_negative():
    with pytest.raises(DomainError):
        DepthMap(np.array([[-1.0]]), np.array([[True]]), "pctof")
    assert math.isnan(DepthMap(np.array([[-1.0]]), np.array([[False]]), "pctof").depth[0, 0])
