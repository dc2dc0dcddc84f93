"""Flat binary checkpoints.

Layout (all integers little-endian)::

    b"ILCK"                      magic, 4 bytes
    u16  version                 currently 1
    u32  meta_len                length of the JSON metadata blob
    meta_len bytes               UTF-8 JSON: tau, dims, plus caller metadata
    u32  n_tensors
    n_tensors x:
        u16 name_len, name bytes (UTF-8)
        u8  ndim, ndim x u32 shape
    float64 little-endian values of every tensor, in header order, C order
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointNotFound, InvalidConfig
from .model import ModelDims, ModelParams

MAGIC = b"ILCK"
VERSION = 1


def dumps(params: ModelParams, meta: dict | None = None) -> bytes:
    blob = dict(meta or {})
    blob["tau"] = params.tau
    blob["dims"] = params.dims_dict()
    meta_bytes = json.dumps(blob, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<HI", VERSION, len(meta_bytes)), meta_bytes,
             struct.pack("<I", len(params.arrays))]
    names = list(params.arrays)
    for name in names:
        arr = params.arrays[name]
        enc = name.encode()
        parts.append(struct.pack("<H", len(enc)) + enc)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
    for name in names:
        parts.append(np.ascontiguousarray(params.arrays[name], dtype="<f8").tobytes())
    return b"".join(parts)


def loads(data: bytes) -> tuple[ModelParams, dict]:
    if data[:4] != MAGIC:
        raise InvalidConfig("not a checkpoint: bad magic")
    version, meta_len = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise InvalidConfig(f"unsupported checkpoint version {version}")
    pos = 10
    meta = json.loads(data[pos:pos + meta_len].decode())
    pos += meta_len
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    header = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + nlen].decode()
        pos += nlen
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        header.append((name, shape))
    arrays = {}
    for name, shape in header:
        size = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
    if pos != len(data):
        raise InvalidConfig("checkpoint has trailing bytes")
    dims = ModelDims(**meta["dims"])
    return ModelParams(dims, arrays, meta["tau"]), meta


def save(path, params: ModelParams, meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps(params, meta))


def load(path) -> tuple[ModelParams, dict]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointNotFound(f"no checkpoint at {path}")
    return loads(path.read_bytes())
