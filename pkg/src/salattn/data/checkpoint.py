"""Named-tensor archive with a fixed little-endian layout.

::

    magic    8 bytes  b"SALCKPT1"
    count    u32      number of records
    record:
      name_len u16, name (utf-8)
      rank     u8, extents u32 * rank
      dtype    u8  (0 = float32, 1 = float64)
      values   little-endian, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

MAGIC = b"SALCKPT1"
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


class CheckpointError(ValueError):
    pass


def save_checkpoint(tensors: Mapping[str, np.ndarray], float32: Iterable[str] = ()) -> bytes:
    """Serialize ``name -> array``; names listed in ``float32`` are down-converted."""
    down = set(float32)
    out = bytearray(MAGIC)
    out += struct.pack("<I", len(tensors))
    seen: set[str] = set()
    for name, arr in tensors.items():
        if name in seen:
            raise CheckpointError(f"duplicate tensor name {name!r}")
        seen.add(name)
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise CheckpointError(f"tensor name too long: {name[:40]}...")
        a = np.asarray(arr)
        dt = np.dtype("float32") if name in down else np.dtype("float64")
        if a.ndim > 0xFF:
            raise CheckpointError(f"rank {a.ndim} too large for {name!r}")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<B", a.ndim)
        out += struct.pack(f"<{a.ndim}I", *a.shape)
        out += struct.pack("<B", _CODES[dt])
        out += np.ascontiguousarray(a, dtype=dt.newbyteorder("<")).tobytes()
    return bytes(out)


def load_checkpoint(data: bytes) -> dict[str, np.ndarray]:
    if data[:8] != MAGIC:
        raise CheckpointError("bad checkpoint magic")
    view = memoryview(data)
    pos = 8

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError("truncated checkpoint")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    result: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = bytes(take(nlen)).decode("utf-8")
        if name in result:
            raise CheckpointError(f"duplicate tensor name {name!r}")
        (rank,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        (code,) = struct.unpack("<B", take(1))
        if code not in _DTYPES:
            raise CheckpointError(f"unknown element type code {code}")
        dt = _DTYPES[code]
        n = int(np.prod(shape, dtype=np.int64)) if rank else 1
        arr = np.frombuffer(bytes(take(n * dt.itemsize)), dtype=dt).reshape(shape)
        result[name] = arr.astype(dt.newbyteorder("="))
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes after last record")
    return result


def write_checkpoint(path, tensors: Mapping[str, np.ndarray], float32: Iterable[str] = ()) -> None:
    Path(path).write_bytes(save_checkpoint(tensors, float32))


def read_checkpoint(path) -> dict[str, np.ndarray]:
    return load_checkpoint(Path(path).read_bytes())
