"""
===============================================================================
CHECKPOINT CONTAINER - FLAT BINARY (NAME, SHAPE, FLOAT64) RECORDS
===============================================================================

Byte layout (all integers little-endian):

    header
        magic           8 bytes   b"TRJCKPT\\0"
        version         uint32    currently 1
        metadata_len    uint32    length of the UTF-8 JSON metadata blob
        metadata        bytes     JSON object (sorted keys): model config,
                                  seed, epoch, precision, ...
        record_count    uint32
    record (repeated record_count times)
        name_len        uint16
        name            bytes     UTF-8 parameter path
        ndim            uint8
        shape           ndim x uint32
        data            prod(shape) x float64 (C order)

Notes:
    - Parameters are always written as float64 regardless of the precision
      they were trained in; load_checkpoint casts back to the requested dtype.
    - Identical parameters + metadata produce byte-identical files.

===============================================================================
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from numerics.params_util import ModelParams
from util.errors_util import LoadError, PathError

MAGIC = b"TRJCKPT\0"
VERSION = 1


def save_checkpoint(path, params: ModelParams, metadata: Dict[str, Any] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")

    chunks = [MAGIC, struct.pack("<II", VERSION, len(meta)), meta, struct.pack("<I", len(params))]
    for block in params:
        name = block.name.encode("utf-8")
        shape = block.tensor.shape
        chunks.append(struct.pack("<H", len(name)))
        chunks.append(name)
        chunks.append(struct.pack("<B", len(shape)))
        chunks.append(struct.pack(f"<{len(shape)}I", *shape))
        chunks.append(np.ascontiguousarray(block.tensor, dtype="<f8").tobytes())

    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)
    return path


def load_checkpoint(path, dtype=np.float64) -> Tuple[ModelParams, Dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise PathError(path)
    raw = path.read_bytes()

    def take(fmt: str, offset: int):
        size = struct.calcsize(fmt)
        if offset + size > len(raw):
            raise LoadError(f"{path}: truncated checkpoint")
        return struct.unpack_from(fmt, raw, offset), offset + size

    if raw[:8] != MAGIC:
        raise LoadError(f"{path}: not a checkpoint file (bad magic)")
    (version, meta_len), offset = take("<II", 8)
    if version != VERSION:
        raise LoadError(f"{path}: unsupported checkpoint version {version}")
    try:
        metadata = json.loads(raw[offset:offset + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LoadError(f"{path}: corrupt metadata ({exc})")
    offset += meta_len
    (count,), offset = take("<I", offset)

    params = ModelParams(dtype=dtype)
    for _ in range(count):
        (name_len,), offset = take("<H", offset)
        name = raw[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,), offset = take("<B", offset)
        shape, offset = take(f"<{ndim}I", offset)
        n = int(np.prod(shape)) if ndim else 1
        nbytes = 8 * n
        if offset + nbytes > len(raw):
            raise LoadError(f"{path}: truncated data for '{name}'")
        data = np.frombuffer(raw, dtype="<f8", count=n, offset=offset).reshape(shape)
        offset += nbytes
        params.add(name, data)
    if offset != len(raw):
        raise LoadError(f"{path}: {len(raw) - offset} trailing bytes")
    return params, metadata
