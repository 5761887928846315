"""The ``tns`` tensor container.

A file is a sequence of records, each::

    b"STSN" | version u16 | dtype u8 | ndim u8 | dims u64 * ndim | payload

All integers are little-endian and the payload is row-major little-endian.
dtype 1 is float32; dtype 2 (float64) is used for model checkpoints so
training can resume bit-exactly.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"STSN"
VERSION = 1
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
CODES = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}


class TnsFormatError(ValueError):
    pass


def encode(array) -> bytes:
    a = np.asarray(array)
    if a.dtype.kind == "b" or a.dtype.kind in "iu":
        a = a.astype("<f4")
    dt = a.dtype.newbyteorder("<")
    if dt not in CODES:
        raise TnsFormatError(f"unsupported dtype {a.dtype}")
    header = MAGIC + struct.pack("<HBB", VERSION, CODES[dt], a.ndim)
    header += struct.pack(f"<{a.ndim}Q", *a.shape)
    return header + np.ascontiguousarray(a, dtype=dt).tobytes(order="C")


def decode_all(buf: bytes) -> list[np.ndarray]:
    out = []
    pos = 0
    view = memoryview(buf)
    while pos < len(buf):
        if bytes(view[pos:pos + 4]) != MAGIC:
            raise TnsFormatError(f"bad magic at byte {pos}")
        version, code, ndim = struct.unpack_from("<HBB", buf, pos + 4)
        if version != VERSION:
            raise TnsFormatError(f"unsupported version {version}")
        if code not in DTYPES:
            raise TnsFormatError(f"unknown dtype code {code}")
        pos += 8
        dims = struct.unpack_from(f"<{ndim}Q", buf, pos)
        pos += 8 * ndim
        dt = DTYPES[code]
        count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        nbytes = count * dt.itemsize
        if pos + nbytes > len(buf):
            raise TnsFormatError("truncated payload")
        arr = np.frombuffer(buf, dtype=dt, count=count, offset=pos).reshape(dims).copy()
        out.append(arr)
        pos += nbytes
    return out


def save(path, arrays) -> None:
    Path(path).write_bytes(b"".join(encode(a) for a in arrays))


def load(path) -> list[np.ndarray]:
    return decode_all(Path(path).read_bytes())
