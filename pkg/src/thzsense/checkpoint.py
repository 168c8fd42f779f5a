"""Binary container for model checkpoints and sensing matrices.

Layout (all little-endian): magic "CRN1", version u32, blob count u32,
then per blob: name length u16, name bytes (utf-8), ndim u8, dims u32
each, and the payload as 32-bit floats. Blob order is preserved.
"""
from __future__ import annotations

import struct

import numpy as np

from .exceptions import DataFormatError

MAGIC = b"CRN1"
VERSION = 1


def write_blobs(path, blobs: dict[str, np.ndarray]):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blobs)))
        for name, arr in blobs.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def _read_exact(fh, n: int, path, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise DataFormatError(
            f"{path}: truncated while reading {what} at byte offset {fh.tell() - len(data)}"
        )
    return data


def read_blobs(path) -> dict[str, np.ndarray]:
    blobs: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, path, "magic")
        if magic != MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        version, count = struct.unpack("<II", _read_exact(fh, 8, path, "header"))
        if version != VERSION:
            raise DataFormatError(f"{path}: unsupported version {version} (expected {VERSION})")
        for i in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, path, f"blob {i} name length"))
            name = _read_exact(fh, name_len, path, f"blob {i} name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, path, f"{name} ndim"))
            shape = tuple(
                struct.unpack("<I", _read_exact(fh, 4, path, f"{name} dims"))[0]
                for _ in range(ndim)
            )
            n_bytes = 4 * int(np.prod(shape, dtype=np.int64)) if shape else 4
            payload = _read_exact(fh, n_bytes, path, f"{name} payload")
            blobs[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    return blobs
