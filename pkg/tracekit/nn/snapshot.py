"""Binary parameter snapshots.

Layout (all integers little-endian)::

    b"TVPK"            magic
    uint32             format version (1)
    uint32             byte length of the config JSON
    bytes              TvpConfig as UTF-8 JSON
    float64[...]       every parameter array, declaration order, row-major
"""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np
from pydantic import ValidationError

from tracekit.errors import SnapshotFormatError
from tracekit.models.schemas import TvpConfig
from tracekit.nn.tvp import TvpParams, zero_params

MAGIC = b"TVPK"
VERSION = 1
_HEADER = struct.Struct("<4sII")
_FLOAT = np.dtype("<f8")


def dump_params(params: TvpParams) -> bytes:
    config = params.config.model_dump_json().encode("utf-8")
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, VERSION, len(config)))
    buf.write(config)
    for _, arr in params.named_arrays():
        buf.write(np.ascontiguousarray(arr, dtype=_FLOAT).tobytes())
    return buf.getvalue()


def loads_params(blob: bytes) -> TvpParams:
    if len(blob) < _HEADER.size:
        raise SnapshotFormatError("snapshot shorter than its header")
    magic, version, config_len = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")

    offset = _HEADER.size
    try:
        config = TvpConfig.model_validate_json(blob[offset:offset + config_len])
    except ValidationError as e:
        raise SnapshotFormatError(f"bad config block: {e}") from e
    offset += config_len

    params = zero_params(config)
    arrays = params.named_arrays()
    expected = offset + sum(arr.size for _, arr in arrays) * _FLOAT.itemsize
    if len(blob) != expected:
        raise SnapshotFormatError(f"snapshot is {len(blob)} bytes, expected {expected}")

    for _, arr in arrays:
        n = arr.size * _FLOAT.itemsize
        arr[...] = np.frombuffer(blob, dtype=_FLOAT, count=arr.size, offset=offset).reshape(arr.shape)
        offset += n
    return params


def save_params(params: TvpParams, target: Union[str, Path, BinaryIO]):
    blob = dump_params(params)
    if hasattr(target, "write"):
        target.write(blob)
    else:
        Path(target).write_bytes(blob)


def load_params(source: Union[str, Path, BinaryIO]) -> TvpParams:
    blob = source.read() if hasattr(source, "read") else Path(source).read_bytes()
    return loads_params(blob)
