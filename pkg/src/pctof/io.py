"""Plain-file map and table formats (CSV, PFM, 16-bit PGM).

Byte layouts are described in docs/formats.md.  CSV values use ``%.17g``
so a float64 survives a write/read round trip unchanged and reruns
produce identical bytes.
"""
import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .errors import FormatError

FLOAT_FMT = "%.17g"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    return str(v)


def write_csv_map(path, array):
    """One line per image row, comma separated; NaN is written as ``nan``."""
    a = np.asarray(array, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-D map")
    with open(path, "w", newline="\n") as fh:
        for row in a:
            fh.write(",".join(FLOAT_FMT % v for v in row))
            fh.write("\n")


def read_csv_map(path):
    try:
        rows = [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]
        data = np.array([[float(v) for v in line.split(",")] for line in rows], dtype=np.float64)
    except (ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: unreadable CSV map ({exc})") from exc
    if data.ndim != 2 or data.size == 0:
        raise FormatError(f"{path}: CSV map rows have unequal lengths or no data")
    return data


def write_table(path, header, rows):
    """Tabular CSV with a header line; floats formatted with ``%.17g``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_table(path):
    with open(path, newline="") as fh:
        r = list(csv.reader(fh))
    if not r:
        raise FormatError(f"{path}: empty table")
    return r[0], r[1:]


def format_text_table(header, rows):
    """Right-aligned plain-text rendering of a table."""
    cells = [list(header)] + [[("%.6g" % v) if isinstance(v, float) else str(v) for v in r] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    out = _io.StringIO()
    for k, c in enumerate(cells):
        out.write("  ".join(s.rjust(w) for s, w in zip(c, widths)).rstrip() + "\n")
        if k == 0:
            out.write("  ".join("-" * w for w in widths) + "\n")
    return out.getvalue()


def write_pfm(path, array):
    """Greyscale PFM: ``Pf`` header, little-endian float32, bottom row first."""
    a = np.asarray(array, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-D map")
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(a[::-1], dtype="<f4").tobytes())


def read_pfm(path):
    raw = Path(path).read_bytes()
    try:
        magic, dims, scale, body = raw.split(b"\n", 3)
        w, h = (int(v) for v in dims.split())
        scale = float(scale)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PFM header") from exc
    if magic != b"Pf":
        raise FormatError(f"{path}: byte 0: expected 'Pf' magic, found {magic[:2]!r}")
    dtype = "<f4" if scale < 0 else ">f4"
    need = w * h * 4
    if len(body) != need:
        offset = len(raw) - len(body)
        raise FormatError(f"{path}: byte {offset}: expected {need} payload bytes, found {len(body)}")
    return np.frombuffer(body, dtype=dtype).reshape(h, w)[::-1].astype(np.float64)


def write_pgm16(path, array, valid=None):
    """16-bit binary PGM plus a ``.scale.json`` sidecar.

    Valid values map linearly onto 1..65535; 0 marks invalid pixels.
    ``value = offset + (code - 1) * step``.
    """
    a = np.asarray(array, dtype=np.float64)
    if valid is None:
        valid = np.isfinite(a)
    valid = np.asarray(valid, dtype=bool) & np.isfinite(a)
    h, w = a.shape
    if np.any(valid):
        lo, hi = float(a[valid].min()), float(a[valid].max())
    else:
        lo = hi = 0.0
    step = (hi - lo) / 65534.0 if hi > lo else 1.0
    codes = np.zeros(a.shape, dtype=">u2")
    codes[valid] = (np.rint((a[valid] - lo) / step) + 1).astype(np.uint16)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(codes.tobytes())
    sidecar = Path(str(path) + ".scale.json")
    sidecar.write_text(json.dumps({"offset": lo, "step": step, "invalid_code": 0,
                                   "unit": "m"}, sort_keys=True, indent=2) + "\n")
    return sidecar


def read_pgm16(path):
    """Inverse of :func:`write_pgm16`; invalid pixels come back as NaN."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise FormatError(f"{path}: byte 0: not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    body = parts[3]
    if len(body) != 2 * w * h:
        raise FormatError(f"{path}: byte {len(raw) - len(body)}: payload length {len(body)} != {2 * w * h}")
    codes = np.frombuffer(body, dtype=">u2").reshape(h, w)
    meta = json.loads(Path(str(path) + ".scale.json").read_text())
    out = meta["offset"] + (codes.astype(np.float64) - 1.0) * meta["step"]
    out[codes == 0] = np.nan
    return out
