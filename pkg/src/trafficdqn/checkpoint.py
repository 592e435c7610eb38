"""Versioned binary checkpoint for network parameters.

Layout::

    TRAFFICDQN-CKPT\\n
    <one line of JSON: version, architecture, seed, hyperparams, layers>\\n
    <raw little-endian float64 arrays, in layer order, C-contiguous>

The JSON header is written with sorted keys and no whitespace variation, so
saving the same parameters and metadata twice yields identical bytes.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .network import Architecture, NetworkParams

MAGIC = b"TRAFFICDQN-CKPT\n"
VERSION = 1
_DTYPE = np.dtype("<f8")


class CheckpointError(Exception):
    pass


def to_bytes(params: NetworkParams, seed: int | None = None, hyperparams: dict | None = None) -> bytes:
    header = {
        "version": VERSION,
        "architecture": asdict(params.arch),
        "seed": seed,
        "hyperparams": hyperparams or {},
        "layers": [{"name": k, "shape": list(v.shape), "dtype": _DTYPE.str} for k, v in params.arrays.items()],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = b"".join(np.ascontiguousarray(v, dtype=_DTYPE).tobytes() for v in params.arrays.values())
    return MAGIC + head + b"\n" + body


def from_bytes(data: bytes) -> tuple[NetworkParams, dict]:
    if not data.startswith(MAGIC):
        raise CheckpointError("not a trafficdqn checkpoint (bad magic)")
    end = data.find(b"\n", len(MAGIC))
    try:
        header = json.loads(data[len(MAGIC) : end]) if end > 0 else None
    except ValueError:
        header = None
    if not isinstance(header, dict):
        raise CheckpointError("unreadable checkpoint header")
    if header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
    arch_fields = header["architecture"]
    arch = Architecture(**{k: tuple(v) if isinstance(v, list) else v for k, v in arch_fields.items()})
    offset = end + 1
    arrays = {}
    for layer in header["layers"]:
        dtype = np.dtype(layer["dtype"])
        shape = tuple(layer["shape"])
        n = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if offset + n > len(data):
            raise CheckpointError(f"truncated checkpoint at layer {layer['name']}")
        arrays[layer["name"]] = np.frombuffer(data, dtype=dtype, count=n // dtype.itemsize, offset=offset).reshape(shape).astype(np.float64)
        offset += n
    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes after last layer")
    meta = {"seed": header["seed"], "hyperparams": header["hyperparams"], "version": header["version"]}
    return NetworkParams(arch, arrays), meta


def save(path, params: NetworkParams, seed: int | None = None, hyperparams: dict | None = None) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(to_bytes(params, seed, hyperparams))
    os.replace(tmp, path)
    return path


def load(path) -> tuple[NetworkParams, dict]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return from_bytes(path.read_bytes())
