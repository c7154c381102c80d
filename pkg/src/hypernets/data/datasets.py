"""Training triples (input image, target image, control vector) for the
rotation, affine and rotation-compensation tasks, plus the HYPD cache file."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal, Mapping, Optional, Sequence, Union

import numpy as np

from ..autodiff import ContractError
from .glyphs import synth_glyphs
from .idx import load_idx
from .warp import Affine, AffineRanges, affine_transform, encode_angle, rotate_image, sample_affine_params

Task = Literal["rotation", "affine", "compensation"]
TASKS = ("rotation", "affine", "compensation")
CONTROL_DIM = {"rotation": 2, "affine": 6, "compensation": 0}

HYPD_MAGIC = b"HYPD"
HYPD_VERSION = 1


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class AngleRule:
    mode: Literal["discrete_set", "continuous_range"]
    values: tuple[float, ...] = ()
    range: tuple[float, float] = (0.0, 360.0)

    def __post_init__(self):
        if self.mode == "discrete_set":
            if not self.values:
                raise ContractError("discrete angle set is empty")
            bad = [v for v in self.values if not 0.0 <= v < 360.0]
            if bad:
                raise ContractError(f"angles must lie in [0, 360): {bad}")
        elif self.mode == "continuous_range":
            lo, hi = self.range
            if not 0.0 <= lo <= hi <= 360.0:
                raise ContractError(f"angle range must satisfy 0 <= lo <= hi <= 360, got {self.range}")
        else:
            raise ContractError(f"unknown angle mode {self.mode!r}")

    def sample(self, rng: np.random.Generator) -> float:
        if self.mode == "discrete_set":
            return float(self.values[rng.integers(len(self.values))])
        a = float(rng.uniform(*self.range))
        return a % 360.0

    def contains(self, angle: float) -> bool:
        if self.mode == "discrete_set":
            return angle in self.values
        return self.range[0] <= angle <= self.range[1]

    def describe(self) -> dict:
        if self.mode == "discrete_set":
            return {"mode": self.mode, "values": list(self.values)}
        return {"mode": self.mode, "range": list(self.range)}


@dataclass(frozen=True)
class AnglePolicy:
    default: AngleRule
    overrides: Mapping[int, AngleRule] = field(default_factory=dict)

    @classmethod
    def discrete(cls, values: Sequence[float], overrides: Optional[Mapping[int, AngleRule]] = None) -> "AnglePolicy":
        return cls(AngleRule("discrete_set", tuple(float(v) for v in values)), dict(overrides or {}))

    @classmethod
    def continuous(cls, lo: float = 0.0, hi: float = 360.0,
                   overrides: Optional[Mapping[int, AngleRule]] = None) -> "AnglePolicy":
        return cls(AngleRule("continuous_range", range=(float(lo), float(hi))), dict(overrides or {}))

    def rule_for(self, label: int) -> AngleRule:
        return self.overrides.get(int(label), self.default)

    def describe(self) -> dict:
        return {"default": self.default.describe(),
                "overrides": {str(k): v.describe() for k, v in sorted(self.overrides.items())}}


def range_rule(lo: float, hi: float) -> AngleRule:
    return AngleRule("continuous_range", range=(float(lo), float(hi)))


EIGHT_DIRECTIONS = tuple(45.0 * k for k in range(8))


@dataclass(frozen=True)
class GlyphSource:
    images: np.ndarray
    labels: np.ndarray
    descriptor: str

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ContractError("images and labels differ in length")

    @property
    def side(self) -> int:
        return int(self.images.shape[-1])

    def __len__(self) -> int:
        return len(self.images)


def synthetic_source(side: int, per_class: int = 20, seed: int = 0, classes: int = 10) -> GlyphSource:
    images, labels = synth_glyphs(side, classes=classes, per_class=per_class, seed=seed)
    desc = f"synthetic(side={side},classes={classes},per_class={per_class},seed={seed})"
    return GlyphSource(images, labels, desc)


def idx_source(images_path, labels_path=None, side: Optional[int] = None, limit: Optional[int] = None) -> GlyphSource:
    images, labels = load_idx(images_path, labels_path, side)
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    desc = f"idx(images={Path(images_path).name},labels={Path(labels_path).name if labels_path else None},side={side},limit={limit})"
    return GlyphSource(images, labels, desc)


@dataclass(frozen=True)
class Sample:
    """One training triple. For the compensation task ``x`` is the rotated
    image and ``target`` the canonical one; ``phi`` is then empty."""

    x: np.ndarray
    target: np.ndarray
    phi: np.ndarray
    class_label: int
    angle: float


@dataclass
class Dataset:
    task: str
    inputs: np.ndarray
    targets: np.ndarray
    phi: np.ndarray
    labels: np.ndarray
    angles: np.ndarray
    provenance: str

    def __len__(self) -> int:
        return len(self.inputs)

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.inputs[i], self.targets[i], self.phi[i], int(self.labels[i]), float(self.angles[i]))

    def __iter__(self) -> Iterator[Sample]:
        return (self[i] for i in range(len(self)))

    @property
    def side(self) -> int:
        return int(self.inputs.shape[-1])

    @property
    def control_dim(self) -> int:
        return int(self.phi.shape[1])

    def subset(self, mask: np.ndarray, note: str = "") -> "Dataset":
        prov = self.provenance if not note else json.dumps({"parent": json.loads(self.provenance), "subset": note},
                                                         sort_keys=True)
        return Dataset(self.task, self.inputs[mask], self.targets[mask], self.phi[mask], self.labels[mask],
                       self.angles[mask], prov)

    def pixel_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.inputs, self.targets, self.phi, self.angles):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.labels, dtype="<i8").tobytes())
        return h.hexdigest()

    def provenance_hash(self) -> str:
        return hashlib.sha256(self.provenance.encode()).hexdigest()


def ground_truth(task: str, x: np.ndarray, angle: float, phi: np.ndarray) -> np.ndarray:
    """Recompute the target for a canonical glyph (compensation: the input)."""
    if task == "affine":
        return affine_transform(x, Affine.from_vector(phi))
    return rotate_image(x, angle)


def make_dataset(source: GlyphSource, task: Task, policy: Union[AnglePolicy, AffineRanges], count: int, seed: int,
                 classes: Optional[Sequence[int]] = None) -> Dataset:
    """Draw ``count`` samples; sample ``i`` uses a generator seeded by
    ``(seed, i)`` so any index can be regenerated in isolation."""
    if task not in TASKS:
        raise ContractError(f"unknown task {task!r}")
    if count < 1:
        raise ContractError(f"count must be >= 1, got {count}")
    if len(source) == 0:
        raise ContractError("glyph source is empty")
    if task == "affine" and not isinstance(policy, AffineRanges):
        raise ContractError("affine task needs AffineRanges")
    if task != "affine" and not isinstance(policy, AnglePolicy):
        raise ContractError(f"{task} task needs an AnglePolicy")
    eligible = np.arange(len(source))
    if classes is not None:
        eligible = eligible[np.isin(source.labels, list(classes))]
        if eligible.size == 0:
            raise ContractError(f"no glyphs of classes {list(classes)} in source")

    side = source.side
    k = CONTROL_DIM[task]
    inputs = np.empty((count, side, side))
    targets = np.empty((count, side, side))
    phi = np.zeros((count, k))
    labels = np.empty(count, dtype=np.int64)
    angles = np.full(count, np.nan)
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        g = eligible[rng.integers(eligible.size)]
        x = source.images[g]
        label = int(source.labels[g])
        labels[i] = label
        if task == "affine":
            p = sample_affine_params(rng, policy)
            phi[i] = p.as_vector()
            inputs[i], targets[i] = x, affine_transform(x, p)
            continue
        a = policy.rule_for(label).sample(rng)
        angles[i] = a
        xr = rotate_image(x, a)
        if task == "rotation":
            phi[i] = encode_angle(a).as_vector()
            inputs[i], targets[i] = x, xr
        else:
            inputs[i], targets[i] = xr, x

    if isinstance(policy, AffineRanges):
        pol = {"affine_ranges": {k_: list(getattr(policy, k_)) for k_ in
                                 ("rotation_deg", "scale", "shear", "translation")}}
    else:
        pol = policy.describe()
    provenance = json.dumps({"source": source.descriptor, "task": task, "policy": pol, "count": count,
                             "seed": seed, "classes": None if classes is None else sorted(int(c) for c in classes)},
                            sort_keys=True)
    return Dataset(task, inputs, targets, phi, labels, angles, provenance)


# -- HYPD cache ---------------------------------------------------------------


def dataset_to_bytes(ds: Dataset) -> bytes:
    prov = ds.provenance.encode()
    task = ds.task.encode()
    m, side, k = len(ds), ds.side, ds.control_dim
    parts = [HYPD_MAGIC, struct.pack("<H", HYPD_VERSION), struct.pack("<I", len(prov)), prov,
             struct.pack("<H", len(task)), task, struct.pack("<III", m, side, k)]
    for i in range(m):
        parts.append(struct.pack("<qd", int(ds.labels[i]), float(ds.angles[i])))
        parts.append(np.ascontiguousarray(ds.phi[i], dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(ds.inputs[i], dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(ds.targets[i], dtype="<f8").tobytes())
    return b"".join(parts)


def dataset_from_bytes(raw: bytes) -> Dataset:
    if raw[:4] != HYPD_MAGIC:
        raise DatasetFormatError("bad magic")
    try:
        off = 4
        (version,) = struct.unpack_from("<H", raw, off)
        off += 2
        if version != HYPD_VERSION:
            raise DatasetFormatError(f"unsupported HYPD version {version}")
        (plen,) = struct.unpack_from("<I", raw, off)
        off += 4
        provenance = raw[off:off + plen].decode()
        off += plen
        (tlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        task = raw[off:off + tlen].decode()
        off += tlen
        m, side, k = struct.unpack_from("<III", raw, off)
        off += 12
        rec = 16 + 8 * (k + 2 * side * side)
        if len(raw) - off != m * rec:
            raise DatasetFormatError(f"payload is {len(raw) - off} bytes, expected {m * rec}")
    except struct.error as exc:
        raise DatasetFormatError(f"truncated header: {exc}") from None
    labels = np.empty(m, dtype=np.int64)
    angles = np.empty(m)
    phi = np.empty((m, k))
    inputs = np.empty((m, side, side))
    targets = np.empty((m, side, side))
    n = side * side
    for i in range(m):
        labels[i], angles[i] = struct.unpack_from("<qd", raw, off)
        body = np.frombuffer(raw, dtype="<f8", count=k + 2 * n, offset=off + 16)
        phi[i] = body[:k]
        inputs[i] = body[k:k + n].reshape(side, side)
        targets[i] = body[k + n:].reshape(side, side)
        off += rec
    return Dataset(task, inputs, targets, phi, labels, angles, provenance)


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_bytes(dataset_to_bytes(ds))


def load_dataset(path) -> Dataset:
    return dataset_from_bytes(Path(path).read_bytes())
