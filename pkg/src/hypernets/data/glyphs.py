"""Procedural digit-like glyphs, a hermetic stand-in for handwritten digits.

Each class is a set of polylines in a normalised frame (x right, y down,
canvas spanning [-1, 1]). Rendering evaluates a smooth stroke profile of the
distance from each pixel centre to the nearest stroke (solid core with a
gaussian edge, both proportional to the canvas side). Class 9 is the point
reflection of class 6 through the canvas centre, so a 180 degree rotation
maps one onto the other.
"""

from __future__ import annotations

import numpy as np

N_CLASSES = 10
STROKE_CORE = 0.02  # solid core radius, fraction of side
STROKE_SIGMA = 0.055  # gaussian edge width, fraction of side


def _arc(cx, cy, rx, ry, start_deg, end_deg, n=24):
    t = np.radians(np.linspace(start_deg, end_deg, n))
    return np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)


def _line(*pts):
    return np.array(pts, dtype=np.float64)


def _six():
    # angles in the y-down frame: 90 deg points down, 270 deg points up
    loop = _arc(0.0, 0.25, 0.32, 0.32, 0, 360, 32)
    stem = _arc(0.42, 0.25, 0.74, 0.85, 180, 252, 16)
    return [loop, stem]


def _strokes(label: int) -> list[np.ndarray]:
    if label == 0:
        return [_arc(0.0, 0.0, 0.36, 0.58, 0, 360, 40)]
    if label == 1:
        return [_line((0.05, -0.6), (0.05, 0.6)), _line((-0.2, -0.38), (0.05, -0.6))]
    if label == 2:
        return [_arc(0.0, -0.28, 0.32, 0.3, 180, 360 + 30, 24),
                _line((0.28, -0.13), (-0.34, 0.6), (0.36, 0.6))]
    if label == 3:
        return [_arc(0.0, -0.3, 0.3, 0.28, 200, 450, 24), _arc(0.0, 0.28, 0.34, 0.32, 270, 520, 24)]
    if label == 4:
        return [_line((0.16, -0.6), (-0.36, 0.22), (0.4, 0.22)), _line((0.16, -0.6), (0.16, 0.6))]
    if label == 5:
        return [_line((0.34, -0.6), (-0.26, -0.6), (-0.3, -0.06)),
                _arc(0.0, 0.24, 0.34, 0.34, 220, 500, 28)]
    if label == 6:
        return _six()
    if label == 7:
        return [_line((-0.36, -0.6), (0.36, -0.6), (-0.08, 0.6))]
    if label == 8:
        return [_arc(0.0, -0.31, 0.26, 0.27, 0, 360, 28), _arc(0.0, 0.29, 0.32, 0.31, 0, 360, 32)]
    if label == 9:
        return [-s for s in _six()]
    raise ValueError(f"glyph class must be in 0..9, got {label}")


def _segment_distance(px, py, a, b):
    d = b - a
    ax, ay = px - a[0], py - a[1]
    denom = d[0] * d[0] + d[1] * d[1]
    t = np.clip((ax * d[0] + ay * d[1]) / denom, 0.0, 1.0) if denom > 0 else 0.0
    ex, ey = ax - t * d[0], ay - t * d[1]
    return np.sqrt(ex * ex + ey * ey)


def render_glyph(label: int, side: int, dx: float = 0.0, dy: float = 0.0, thickness: float = 1.0) -> np.ndarray:
    """Render one glyph; ``dx``/``dy`` shift it by whole or fractional pixels."""
    if side < 8:
        raise ValueError(f"side must be >= 8, got {side}")
    half = side / 2.0
    c = (side - 1) / 2.0
    rows, cols = np.mgrid[0:side, 0:side].astype(np.float64)
    px = (cols - c - dx) / half
    py = (rows - c - dy) / half
    dist = np.full((side, side), np.inf)
    for poly in _strokes(label):
        for a, b in zip(poly[:-1], poly[1:]):
            dist = np.minimum(dist, _segment_distance(px, py, a, b))
    core = STROKE_CORE * side * thickness
    sigma = STROKE_SIGMA * side * thickness
    excess = np.maximum(dist * half - core, 0.0)
    return np.exp(-0.5 * (excess / sigma) ** 2)


def synth_glyphs(side: int, classes: int = N_CLASSES, per_class: int = 20, seed: int = 0):
    """Seeded glyph set with 1-pixel translation and stroke-thickness jitter.

    Returns ``(images, labels)`` with images of shape ``(classes*per_class,
    side, side)``, ordered class-major.
    """
    if side < 8:
        raise ValueError(f"side must be >= 8, got {side}")
    if not 1 <= classes <= N_CLASSES:
        raise ValueError(f"classes must be in 1..{N_CLASSES}")
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for label in range(classes):
        for _ in range(per_class):
            dx, dy = rng.integers(-1, 2, size=2)
            thick = rng.uniform(0.85, 1.15)
            images.append(render_glyph(label, side, float(dx), float(dy), thick))
            labels.append(label)
    return np.stack(images), np.array(labels, dtype=np.int64)


def glyph_radius(label: int) -> float:
    """Largest distance of any stroke vertex from the centre (normalised)."""
    return max(float(np.max(np.hypot(p[:, 0], p[:, 1]))) for p in _strokes(label))


__all__ = ["N_CLASSES", "glyph_radius", "render_glyph", "synth_glyphs"]
