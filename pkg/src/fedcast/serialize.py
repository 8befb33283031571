"""Portable binary checkpoints for parameter vectors.

Layout (all integers little-endian):
  magic   4 bytes  b"FCPV"
  version u32      currently 1
  groups  u32
  then per group, in vector order:
    name_len u16, name utf-8,
    ndim u8, dims u32 * ndim,
    data float64 little-endian, C order
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .params import ParamVector

MAGIC = b"FCPV"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_params(params: ParamVector, path) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, arr in params.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_params(path) -> ParamVector:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {buf[:4]!r}")
    version, n_groups = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    pos = 12
    groups = []
    for _ in range(n_groups):
        (name_len,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(shape)
        pos += 8 * count
        groups.append((name, arr.astype(np.float64)))
    if pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - pos} trailing bytes")
    return ParamVector(groups)
