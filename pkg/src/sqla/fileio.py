"""SQM1 matrix files and CSV import.

An SQM1 record is the 4-byte magic ``b"SQM1"``, then little-endian u64 rows
and u64 cols, then ``rows * cols`` little-endian float64 values in row-major
order. Vectors are stored with one row. A container file is a plain
concatenation of records.
"""
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"SQM1"
_HEADER = struct.Struct("<4sQQ")


def _record_bytes(array):
    a = np.asarray(array, dtype="<f8")
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError("SQM1 stores 1-D or 2-D arrays only")
    return _HEADER.pack(MAGIC, a.shape[0], a.shape[1]) + np.ascontiguousarray(a).tobytes()


def write_sqm(path, array):
    Path(path).write_bytes(_record_bytes(array))


def write_sqm_blocks(path, arrays):
    Path(path).write_bytes(b"".join(_record_bytes(a) for a in arrays))


def _parse_records(buf, name):
    out = []
    off = 0
    while off < len(buf):
        if len(buf) - off < _HEADER.size:
            raise FormatError(f"{name}: truncated SQM1 header at byte {off}")
        magic, rows, cols = _HEADER.unpack_from(buf, off)
        if magic != MAGIC:
            raise FormatError(f"{name}: bad magic {magic!r} at byte {off}")
        off += _HEADER.size
        nbytes = rows * cols * 8
        if len(buf) - off < nbytes:
            raise FormatError(f"{name}: expected {rows}x{cols} float64 payload, file too short")
        data = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=off)
        out.append(data.reshape(rows, cols).astype(np.float64))
        off += nbytes
    return out


def read_sqm_blocks(path):
    buf = Path(path).read_bytes()
    return _parse_records(buf, str(path))


def read_sqm(path):
    """Read a single-record SQM1 file as a 2-D float64 array."""
    blocks = read_sqm_blocks(path)
    if len(blocks) != 1:
        raise FormatError(f"{path}: expected one SQM1 record, found {len(blocks)}")
    return blocks[0]


def read_csv(path):
    try:
        a = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: not a numeric CSV ({exc})") from exc
    return a


def read_matrix(path):
    """Load SQM1 (detected by magic) or plain numeric CSV."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_sqm(path)
    return read_csv(path)


def read_vector(path):
    a = read_matrix(path)
    if a.shape[0] != 1 and a.shape[1] != 1:
        raise FormatError(f"{path}: expected a vector, got shape {a.shape}")
    return a.reshape(-1)
