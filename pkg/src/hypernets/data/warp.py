"""Ground-truth image warps: rotation and 6-parameter affine, by inverse
mapping with bilinear sampling.

Geometry is expressed in a centred frame with ``u`` pointing right and ``v``
pointing up, origin at the pixel-grid centre ``((side-1)/2, (side-1)/2)``.
A pixel at (row, col) sits at ``u = col - c``, ``v = c - row``. Positive
angles rotate counterclockwise as displayed. Affine parameters
``(a11, a12, a13, a21, a22, a23)`` describe the forward map
``p' = [[a11, a12], [a21, a22]] p + (a13, a23)`` in that frame, translation
in pixels (``a13`` right, ``a23`` up).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..autodiff import ContractError

MIN_DETERMINANT = 0.1


@dataclass(frozen=True)
class Rotation:
    sin_a: float
    cos_a: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.sin_a, self.cos_a])


@dataclass(frozen=True)
class Affine:
    a11: float
    a12: float
    a13: float
    a21: float
    a22: float
    a23: float

    @classmethod
    def from_vector(cls, v) -> "Affine":
        return cls(*(float(t) for t in v))

    @classmethod
    def from_rotation(cls, angle_deg: float) -> "Affine":
        r = encode_angle(angle_deg)
        return cls(r.cos_a, -r.sin_a, 0.0, r.sin_a, r.cos_a, 0.0)

    def as_vector(self) -> np.ndarray:
        return np.array([self.a11, self.a12, self.a13, self.a21, self.a22, self.a23])

    @property
    def determinant(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21


TransformParams = Union[Rotation, Affine]


def encode_angle(angle_deg: float) -> Rotation:
    a = math.radians(angle_deg)
    return Rotation(math.sin(a), math.cos(a))


def _bilinear(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``img`` at fractional (col, row) positions, zero outside."""
    side_y, side_x = img.shape
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    out = np.zeros(xs.shape)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            yy, xx = y0 + dy, x0 + dx
            ok = (yy >= 0) & (yy < side_y) & (xx >= 0) & (xx < side_x)
            vals = np.zeros(xs.shape)
            vals[ok] = img[yy[ok], xx[ok]]
            out = out + (wy * wx) * vals
    return out


def _centred_grid(side: int) -> tuple[np.ndarray, np.ndarray, float]:
    c = (side - 1) / 2.0
    rows, cols = np.mgrid[0:side, 0:side].astype(np.float64)
    return cols - c, c - rows, c


def rotate_image(img: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rotate counterclockwise by ``angle_deg`` about the grid centre."""
    r = encode_angle(angle_deg)
    return _rotate(img, r.sin_a, r.cos_a)


def _rotate(img: np.ndarray, s: float, co: float) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    u, v, c = _centred_grid(img.shape[0])
    # inverse of a CCW rotation is rotation by -a
    us = co * u + s * v
    vs = -s * u + co * v
    out = _bilinear(img, us + c, c - vs)
    return np.clip(out, 0.0, 1.0)


def affine_transform(img: np.ndarray, p: Affine) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    det = p.determinant
    if not det > MIN_DETERMINANT:
        raise ContractError(f"degenerate affine parameters: determinant {det:.4g} <= {MIN_DETERMINANT}")
    side = img.shape[0]
    u, v, c = _centred_grid(side)
    du, dv = u - p.a13, v - p.a23
    us = (p.a22 * du - p.a12 * dv) / det
    vs = (-p.a21 * du + p.a11 * dv) / det
    out = _bilinear(img, us + c, c - vs)
    return np.clip(out, 0.0, 1.0)


def apply_transform(img: np.ndarray, p: TransformParams) -> np.ndarray:
    if isinstance(p, Rotation):
        return _rotate(img, p.sin_a, p.cos_a)
    return affine_transform(img, p)


@dataclass(frozen=True)
class AffineRanges:
    """Bounds for random affine draws. Each pair is a closed interval."""

    rotation_deg: tuple[float, float] = (-30.0, 30.0)
    scale: tuple[float, float] = (0.8, 1.2)
    shear: tuple[float, float] = (-0.2, 0.2)
    translation: tuple[float, float] = (-16 / 9, 16 / 9)

    @classmethod
    def default(cls, side: int) -> "AffineRanges":
        t = side / 9.0
        return cls(translation=(-t, t))

    @classmethod
    def identity(cls) -> "AffineRanges":
        return cls((0.0, 0.0), (1.0, 1.0), (0.0, 0.0), (0.0, 0.0))

    def validate(self) -> None:
        for name in ("rotation_deg", "scale", "shear", "translation"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ContractError(f"affine range {name} has lo > hi: {(lo, hi)}")
        if self.scale[0] <= 0 or self.scale[0] ** 2 <= MIN_DETERMINANT:
            raise ContractError(f"scale lower bound {self.scale[0]} allows degenerate transforms")


def sample_affine_params(rng_seed, ranges: AffineRanges) -> Affine:
    """Draw rotation, per-axis scale, shear and translation and compose them
    as ``R @ Shear @ Scale``; the determinant is ``sx * sy``."""
    ranges.validate()
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    theta = math.radians(rng.uniform(*ranges.rotation_deg))
    sx = rng.uniform(*ranges.scale)
    sy = rng.uniform(*ranges.scale)
    k = rng.uniform(*ranges.shear)
    tx = rng.uniform(*ranges.translation)
    ty = rng.uniform(*ranges.translation)
    co, s = math.cos(theta), math.sin(theta)
    rot = np.array([[co, -s], [s, co]])
    m = rot @ np.array([[1.0, k], [0.0, 1.0]]) @ np.diag([sx, sy])
    return Affine(m[0, 0], m[0, 1], tx, m[1, 0], m[1, 1], ty)
