"""PTNSR1 tensor files: magic, u32 rank, rank x u64 dims, little-endian f64 payload (row-major)."""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ShapeError

MAGIC = b"PTNSR1"


def dumps(array) -> bytes:
    a = np.array(array, dtype="<f8", order="C")  # ascontiguousarray would promote 0-d input to 1-d
    head = MAGIC + struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    return head + a.tobytes()


def loads(data: bytes) -> np.ndarray:
    if data[:6] != MAGIC:
        raise ShapeError("not a PTNSR1 tensor (bad magic)")
    if len(data) < 10:
        raise ShapeError("truncated PTNSR1 header")
    (rank,) = struct.unpack_from("<I", data, 6)
    off = 10 + 8 * rank
    if len(data) < off:
        raise ShapeError("truncated PTNSR1 header")
    dims = struct.unpack_from(f"<{rank}Q", data, 10)
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    if len(data) != off + 8 * count:
        raise ShapeError(f"PTNSR1 payload is {len(data) - off} bytes, expected {8 * count}")
    return np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(dims).astype(np.float64)


def save(path: str | Path, array) -> None:
    Path(path).write_bytes(dumps(array))


def load(path: str | Path) -> np.ndarray:
    return loads(Path(path).read_bytes())
