"""HYPN model files: magic, u16 version, u32-length canonical spec text,
then every parameter as little-endian f64 in declaration order."""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .spec import ModelSpec, SpecError, param_decls
from .zoo import Model

HYPN_MAGIC = b"HYPN"
HYPN_VERSION = 1


class ModelFormatError(ValueError):
    pass


def model_to_bytes(model: Model) -> bytes:
    text = model.spec.to_text().encode()
    parts = [HYPN_MAGIC, struct.pack("<HI", HYPN_VERSION, len(text)), text]
    for d in model.decls:
        parts.append(np.ascontiguousarray(model.params[d.name], dtype="<f8").tobytes())
    return b"".join(parts)


def model_from_bytes(raw: bytes) -> Model:
    if raw[:4] != HYPN_MAGIC:
        raise ModelFormatError("bad magic")
    if len(raw) < 10:
        raise ModelFormatError("truncated header")
    version, tlen = struct.unpack_from("<HI", raw, 4)
    if version != HYPN_VERSION:
        raise ModelFormatError(f"unsupported HYPN version {version}")
    off = 10 + tlen
    if len(raw) < off:
        raise ModelFormatError("truncated spec text")
    try:
        spec = ModelSpec.from_text(raw[10:off].decode())
    except (UnicodeDecodeError, SpecError) as exc:
        raise ModelFormatError(f"invalid spec: {exc}") from None
    decls = param_decls(spec)
    need = 8 * sum(math.prod(d.shape) for d in decls)
    if len(raw) - off != need:
        raise ModelFormatError(f"parameter payload is {len(raw) - off} bytes, expected {need}")
    params = {}
    for d in decls:
        n = math.prod(d.shape)
        params[d.name] = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(d.shape).astype(np.float64)
        off += 8 * n
    return Model(spec, params)


def save_model(model: Model, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path) -> Model:
    return model_from_bytes(Path(path).read_bytes())
