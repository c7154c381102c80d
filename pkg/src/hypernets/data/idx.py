"""Reader for IDX files (the MNIST distribution format), optionally gzipped.

Layout: 4-byte big-endian magic ``0x0000TTDD`` (TT = element type, 0x08 for
unsigned bytes; DD = number of dimensions), then DD big-endian u32 sizes,
then the payload.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path
from typing import Optional

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (at byte offset {offset})")
        self.offset = offset


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def parse_idx(raw: bytes, expect_magic: int) -> np.ndarray:
    if len(raw) < 4:
        raise IdxFormatError("file too short for magic number", len(raw))
    (magic,) = struct.unpack_from(">I", raw, 0)
    if magic != expect_magic:
        raise IdxFormatError(f"bad magic 0x{magic:08x}, expected 0x{expect_magic:08x}", 0)
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise IdxFormatError("truncated dimension header", len(raw))
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    count = int(np.prod(dims, dtype=np.int64))
    if len(raw) - header_end < count:
        raise IdxFormatError(f"truncated payload: need {count} bytes, have {len(raw) - header_end}", len(raw))
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header_end).reshape(dims)


def area_downsample(images: np.ndarray, side: int) -> np.ndarray:
    """Area-average square images of any size down (or up) to ``side``."""
    src = images.shape[-1]
    if src == side:
        return images
    m = np.zeros((side, src))
    ratio = src / side
    for i in range(side):
        lo, hi = i * ratio, (i + 1) * ratio
        for j in range(int(np.floor(lo)), min(src, int(np.ceil(hi)))):
            m[i, j] = max(0.0, min(hi, j + 1) - max(lo, j)) / ratio
    return np.einsum("ij,njk,lk->nil", m, images, m)


def read_idx_images(path, side: Optional[int] = None) -> np.ndarray:
    arr = parse_idx(_read_bytes(path), IMAGES_MAGIC)
    if arr.shape[1] != arr.shape[2]:
        raise IdxFormatError(f"non-square images {arr.shape[1]}x{arr.shape[2]}", 8)
    images = arr.astype(np.float64) / 255.0
    if side is not None:
        images = np.clip(area_downsample(images, side), 0.0, 1.0)
    return images


def read_idx_labels(path) -> np.ndarray:
    return parse_idx(_read_bytes(path), LABELS_MAGIC).astype(np.int64)


def load_idx(images_path, labels_path=None, side: Optional[int] = None):
    """Load images (scaled to [0, 1]) and labels; labels default to zeros."""
    images = read_idx_images(images_path, side)
    if labels_path is None:
        labels = np.zeros(len(images), dtype=np.int64)
    else:
        labels = read_idx_labels(labels_path)
        if len(labels) != len(images):
            raise IdxFormatError(f"{len(labels)} labels for {len(images)} images", 4)
    return images, labels
