"""Flat binary mask files and inference-time upsampling.

A mask file is a header of three little-endian uint32 values {K, H, W}
followed by K*H*W row-major cells: one uint8 byte per cell for ground truth,
one little-endian float32 per cell for predicted probabilities.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from tracekit.errors import ShapeMismatch

_HEADER = struct.Struct("<III")
CELL_TYPES = {"gt": np.dtype("u1"), "pred": np.dtype("<f4")}


def _cell_type(kind: str) -> np.dtype:
    if kind not in CELL_TYPES:
        raise ValueError(f"mask kind must be one of {sorted(CELL_TYPES)}, got {kind!r}")
    return CELL_TYPES[kind]


def encode_masks(masks: np.ndarray, kind: str) -> bytes:
    masks = np.asarray(masks)
    if masks.ndim == 2:
        masks = masks[None]
    if masks.ndim != 3:
        raise ShapeMismatch(f"masks must be (K, H, W), got {masks.shape}")
    return _HEADER.pack(*masks.shape) + np.ascontiguousarray(masks, dtype=_cell_type(kind)).tobytes()


def decode_masks(blob: bytes, kind: str) -> np.ndarray:
    dtype = _cell_type(kind)
    if len(blob) < _HEADER.size:
        raise ShapeMismatch("mask file shorter than its header")
    k, h, w = _HEADER.unpack_from(blob)
    expected = _HEADER.size + k * h * w * dtype.itemsize
    if len(blob) != expected:
        raise ShapeMismatch(f"mask file is {len(blob)} bytes, header {k}x{h}x{w} needs {expected}")
    cells = np.frombuffer(blob, dtype=dtype, offset=_HEADER.size)
    return cells.reshape(k, h, w).astype(np.float64)


def write_masks(path: Union[str, Path], masks: np.ndarray, kind: str = "pred"):
    Path(path).write_bytes(encode_masks(masks, kind))


def read_masks(path: Union[str, Path], kind: str = "pred") -> np.ndarray:
    return decode_masks(Path(path).read_bytes(), kind)


def upsample_mask(pred: np.ndarray, height: int, width: int) -> np.ndarray:
    """Nearest-neighbour resize of (K, h, w) or (h, w) masks to height x width."""
    pred = np.asarray(pred)
    if pred.ndim not in (2, 3) or 0 in pred.shape[-2:]:
        raise ShapeMismatch(f"cannot upsample mask of shape {pred.shape}")
    if height <= 0 or width <= 0:
        raise ShapeMismatch(f"target size {height}x{width} must be positive")
    h, w = pred.shape[-2:]
    rows = np.minimum(((np.arange(height) + 0.5) * h / height).astype(np.int64), h - 1)
    cols = np.minimum(((np.arange(width) + 0.5) * w / width).astype(np.int64), w - 1)
    return pred[..., rows[:, None], cols[None, :]]
