"""Versioned binary container for calibration tables.

Layout (all integers little-endian)::

    offset 0   8 bytes   magic b"PCTOFCAL"
    offset 8   u32       format version (1)
    offset 12  u32       header length H in bytes
    offset 16  H bytes   UTF-8 JSON header
    ...        arrays    raw little-endian payloads in header order
    end - 4    u32       CRC-32 of every preceding byte

The header lists each array's name, dtype and shape.  Hermite knot slopes are
not stored; they are recomputed deterministically from the knot values.
"""
import hashlib
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .calibration import CalibrationTable
from .errors import FormatError
from .signal_model import CodingConfig

MAGIC = b"PCTOFCAL"
VERSION = 1
_ARRAYS = ("xs", "ys", "plateau_hi", "plateau_lo", "zero_phase", "interval_lo", "interval_hi",
           "smoothing", "valid", "mask")


def config_hash(obj):
    """SHA-256 of the canonical JSON rendering of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _dtype_for(name):
    return "|u1" if name == "valid" else "<f8"


def dumps(table):
    header = {
        "config": table.config_summary(),
        "reference_depth": table.reference_depth,
        "doi": table.doi,
        "resolution": list(table.resolution),
        "seed": int(table.seed),
        "zero_phase_median": table.zero_phase_median,
        "arrays": [],
    }
    header["config_hash"] = config_hash(header["config"])
    payloads = []
    for name in _ARRAYS:
        a = np.ascontiguousarray(getattr(table, name), dtype=_dtype_for(name))
        header["arrays"].append({"name": name, "dtype": _dtype_for(name), "shape": list(a.shape)})
        payloads.append(a.tobytes())
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = MAGIC + struct.pack("<II", VERSION, len(head)) + head + b"".join(payloads)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def save_calibration(table, path):
    Path(path).write_bytes(dumps(table))


def loads(raw, source="<bytes>"):
    if len(raw) < 20:
        raise FormatError(f"{source}: byte 0: file is {len(raw)} bytes, too short for a calibration container")
    if raw[:8] != MAGIC:
        raise FormatError(f"{source}: byte 0: bad magic {raw[:8]!r}, expected {MAGIC!r}")
    version, hlen = struct.unpack_from("<II", raw, 8)
    if version != VERSION:
        raise FormatError(f"{source}: byte 8: unsupported container version {version}")
    (crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    actual = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if crc != actual:
        raise FormatError(f"{source}: byte {len(raw) - 4}: CRC mismatch "
                          f"(stored {crc:08x}, computed {actual:08x})")
    if 16 + hlen > len(raw) - 4:
        raise FormatError(f"{source}: byte 12: header length {hlen} runs past the payload")
    try:
        header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise FormatError(f"{source}: byte 16: header is not valid JSON ({exc})") from exc
    pos = 16 + hlen
    arrays = {}
    try:
        for spec in header["arrays"]:
            dt = np.dtype(spec["dtype"])
            count = int(np.prod(spec["shape"], dtype=np.int64))
            size = count * dt.itemsize
            if pos + size > len(raw) - 4:
                raise FormatError(f"{source}: byte {pos}: array {spec['name']!r} needs {size} bytes, "
                                  f"only {len(raw) - 4 - pos} remain")
            arrays[spec["name"]] = np.frombuffer(raw, dtype=dt, count=count, offset=pos).reshape(spec["shape"]).copy()
            pos += size
        if pos != len(raw) - 4:
            raise FormatError(f"{source}: byte {pos}: {len(raw) - 4 - pos} unexpected trailing bytes")
        cfg = header["config"]
        if config_hash(cfg) != header["config_hash"]:
            raise FormatError(f"{source}: byte 16: config hash does not match the header contents")
        missing = [n for n in _ARRAYS if n not in arrays]
        if missing:
            raise FormatError(f"{source}: byte 16: header lacks arrays {missing}")
        return CalibrationTable(
            coding=CodingConfig.from_description(cfg["coding"]), exposure=float(cfg["exposure"]),
            reference_depth=float(header["reference_depth"]), doi=float(header["doi"]),
            seed=int(header["seed"]), zero_phase_median=float(header["zero_phase_median"]),
            noise=dict(cfg["noise"]), valid=arrays.pop("valid").astype(bool), **arrays)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{source}: byte 16: malformed header ({exc!r})") from exc


def load_calibration(path):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read calibration ({exc.strerror})") from exc
    return loads(raw, str(path))
