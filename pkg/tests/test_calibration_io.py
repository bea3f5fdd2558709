import struct
import zlib

import numpy as np
import pytest

from pctof.calibration_io import MAGIC, config_hash, dumps, load_calibration, loads, save_calibration
from pctof.errors import FormatError


def _fields(t):
    return ("xs", "ys", "ds", "plateau_hi", "plateau_lo", "zero_phase", "interval_lo", "interval_hi",
            "smoothing", "valid", "mask")


def test_round_trip_lossless(tmp_path, small_table):
    path = tmp_path / "cal.pctofcal"
    save_calibration(small_table, path)
    back = load_calibration(path)
    for name in _fields(small_table):
        a, b = getattr(small_table, name), getattr(back, name)
        assert a.dtype == b.dtype or name == "valid"
        np.testing.assert_array_equal(a, b)
    assert back.coding == small_table.coding
    assert back.zero_phase_median == small_table.zero_phase_median
    assert back.reference_depth == small_table.reference_depth and back.doi == small_table.doi
    assert dumps(back) == dumps(small_table)


def test_header_layout(small_table):
    raw = dumps(small_table)
    assert raw[:8] == MAGIC
    version, hlen = struct.unpack_from("<II", raw, 8)
    assert version == 1 and hlen > 0
    assert struct.unpack_from("<I", raw, len(raw) - 4)[0] == zlib.crc32(raw[:-4])


def test_config_hash_is_canonical():
    assert config_hash({"b": 1, "a": [1.5]}) == config_hash({"a": [1.5], "b": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def _recrc(raw):
    body = raw[:-4]
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


@pytest.mark.parametrize("mutate, offset", [
    (lambda r: r[:10], "byte 0"),
    (lambda r: b"NOTACAL!" + r[8:], "byte 0"),
    (lambda r: _recrc(r[:8] + struct.pack("<I", 99) + r[12:]), "byte 8"),
    (lambda r: r[:100] + bytes([r[100] ^ 0xFF]) + r[101:], "CRC"),
])
def test_corrupt_files_report_offsets(small_table, mutate, offset):
    with pytest.raises(FormatError, match=offset):
        loads(mutate(dumps(small_table)))


def test_truncated_payload_reports_position(small_table):
    raw = dumps(small_table)
    _, hlen = struct.unpack_from("<II", raw, 8)
    cut = _recrc(raw[:-4 - 64] + raw[-4:])
    with pytest.raises(FormatError, match=r"byte \d+: array"):
        loads(cut)


def test_tampered_config_detected(small_table):
    raw = dumps(small_table)
    _, hlen = struct.unpack_from("<II", raw, 8)
    head = raw[16:16 + hlen].replace(b'"exposure": 0.001', b'"exposure": 0.002')
    assert len(head) == hlen
    with pytest.raises(FormatError, match="config hash"):
        loads(_recrc(raw[:16] + head + raw[16 + hlen:]))


def test_missing_file(tmp_path):
    with pytest.raises(FormatError):
        load_calibration(tmp_path / "absent.pctofcal")
