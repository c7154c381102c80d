"""Binary PGM comparison grids."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..autodiff import ContractError


def quantize(img: np.ndarray) -> np.ndarray:
    """Intensities to bytes: round(v * 255) after clamping to [0, 1]."""
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def pgm_bytes(pixels: np.ndarray) -> bytes:
    if pixels.dtype != np.uint8 or pixels.ndim != 2:
        raise ContractError("PGM needs a 2-D uint8 array")
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode() + pixels.tobytes()


def read_pgm(raw: bytes) -> np.ndarray:
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5" or int(parts[3]) != 255:
        raise ContractError("not an 8-bit binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4], dtype=np.uint8, count=w * h).reshape(h, w)


@dataclass
class ComparisonGrid:
    """Rows of image groups; ``columns`` names what each cell in a group shows."""

    rows: list[list[np.ndarray]]
    columns: tuple[str, ...]

    def __post_init__(self):
        if not self.rows:
            raise ContractError("grid needs at least one row")
        sides = {c.shape for row in self.rows for c in row}
        if len(sides) != 1:
            raise ContractError(f"all cells must share a side, got {sorted(sides)}")
        group = len(self.columns)
        for row in self.rows:
            if len(row) % group:
                raise ContractError(f"row of {len(row)} cells is not a whole number of {group}-groups")

    @property
    def side(self) -> int:
        return self.rows[0][0].shape[0]

    def pixels(self) -> np.ndarray:
        s = self.side
        ncols = max(len(r) for r in self.rows)
        out = np.full(((s + 1) * len(self.rows) - 1, (s + 1) * ncols - 1), 255, dtype=np.uint8)
        for i, row in enumerate(self.rows):
            for j, cell in enumerate(row):
                out[i * (s + 1):i * (s + 1) + s, j * (s + 1):j * (s + 1) + s] = quantize(cell)
        return out

    def to_pgm(self) -> bytes:
        return pgm_bytes(self.pixels())

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_pgm())


def grid_shape(available: int, rows: int, groups: int) -> tuple[int, int]:
    """Clamp (rows, groups per row) to the number of available samples."""
    if rows < 1 or groups < 1:
        raise ContractError("rows and groups must be >= 1")
    groups = min(groups, available)
    rows = min(rows, max(1, available // groups))
    return rows, groups


def paired_grid(sets: Sequence[np.ndarray], columns: Sequence[str], rows: int, groups: int) -> ComparisonGrid:
    """Interleave aligned image stacks: each group holds sets[0][k], sets[1][k], ..."""
    n = min(len(s) for s in sets)
    rows, groups = grid_shape(n, rows, groups)
    body = []
    for r in range(rows):
        row = []
        for g in range(groups):
            k = r * groups + g
            row.extend(s[k] for s in sets)
        body.append(row)
    return ComparisonGrid(body, tuple(columns))
