import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pctof.errors import FormatError
from pctof.io import (
    format_text_table,
    read_csv_map,
    read_pfm,
    read_pgm16,
    read_table,
    write_csv_map,
    write_pfm,
    write_pgm16,
    write_table,
)

maps = arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(-1e6, 1e6, allow_nan=False))


@given(maps)
def test_csv_round_trip_exact(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("csv") / "m.csv"
    write_csv_map(p, a)
    np.testing.assert_array_equal(read_csv_map(p), a)


def test_csv_nan(tmp_path):
    a = np.array([[1.0, np.nan]])
    write_csv_map(tmp_path / "m.csv", a)
    assert (tmp_path / "m.csv").read_text() == "1,nan\n"
    assert np.isnan(read_csv_map(tmp_path / "m.csv")[0, 1])


def test_csv_ragged(tmp_path):
    (tmp_path / "m.csv").write_text("1,2\n3\n")
    with pytest.raises(FormatError):
        read_csv_map(tmp_path / "m.csv")


def test_pfm_layout(tmp_path):
    a = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    write_pfm(tmp_path / "m.pfm", a)
    raw = (tmp_path / "m.pfm").read_bytes()
    assert raw.startswith(b"Pf\n2 3\n-1.0\n")
    body = np.frombuffer(raw[len(b"Pf\n2 3\n-1.0\n"):], dtype="<f4")
    np.testing.assert_array_equal(body[:2], [5.0, 6.0])
    np.testing.assert_array_equal(read_pfm(tmp_path / "m.pfm"), a)


def test_pfm_truncated(tmp_path):
    write_pfm(tmp_path / "m.pfm", np.ones((2, 2)))
    raw = (tmp_path / "m.pfm").read_bytes()
    (tmp_path / "m.pfm").write_bytes(raw[:-3])
    with pytest.raises(FormatError, match="byte"):
        read_pfm(tmp_path / "m.pfm")


def test_pgm16_round_trip(tmp_path):
    a = np.array([[0.5, 0.51], [np.nan, 0.52]])
    sidecar = write_pgm16(tmp_path / "m.pgm", a)
    meta = json.loads(sidecar.read_text())
    assert meta["invalid_code"] == 0 and meta["offset"] == 0.5
    raw = (tmp_path / "m.pgm").read_bytes()
    assert raw.startswith(b"P5\n2 2\n65535\n")
    codes = np.frombuffer(raw[len(b"P5\n2 2\n65535\n"):], dtype=">u2")
    assert codes[2] == 0 and codes[0] == 1 and codes[3] == 65535
    back = read_pgm16(tmp_path / "m.pgm")
    assert np.isnan(back[1, 0])
    np.testing.assert_allclose(back[~np.isnan(back)], a[~np.isnan(a)], atol=0.02 / 65534)


def test_table_round_trip(tmp_path):
    write_table(tmp_path / "t.csv", ("a", "b"), [("x", 0.1), ("y", 2)])
    assert (tmp_path / "t.csv").read_text() == "a,b\nx,0.10000000000000001\ny,2\n"
    head, rows = read_table(tmp_path / "t.csv")
    assert head == ["a", "b"] and rows[1] == ["y", "2"]


def test_text_table_aligned():
    text = format_text_table(("mode", "rms"), [("pctof", 0.001), ("sinusoid", 0.25)])
    lines = text.splitlines()
    assert len({len(l) for l in lines}) == 1
    assert lines[1].startswith("--")
