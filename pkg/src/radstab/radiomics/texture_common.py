"""Shared texture machinery: offsets, matrix container, helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# The 13 unique 3D offsets at Chebyshev distance 1 (one per direction pair).
OFFSETS_13 = tuple(
    (dx, dy, dz)
    for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
    if (dx, dy, dz) > (0, 0, 0)
)

# All 26 neighbor offsets (Chebyshev radius 1).
OFFSETS_26 = tuple(
    (dx, dy, dz)
    for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
)


@dataclass
class GrayLevelMatrix:
    family: str
    counts: np.ndarray

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def probabilities(self) -> np.ndarray:
        t = self.total
        if t == 0:
            return np.zeros_like(self.counts, dtype=np.float64)
        return self.counts.astype(np.float64) / t


def shifted_views(arr: np.ndarray, offset):
    """Return aligned views (a, b) with b displaced by ``offset`` from a."""
    slices_a, slices_b = [], []
    for d, n in zip(offset, arr.shape):
        if d >= 0:
            slices_a.append(slice(0, n - d))
            slices_b.append(slice(d, n))
        else:
            slices_a.append(slice(-d, n))
            slices_b.append(slice(0, n + d))
    return arr[tuple(slices_a)], arr[tuple(slices_b)]


def xlogx(p: np.ndarray) -> np.ndarray:
    """p * log2(p) with the 0 log 0 = 0 convention."""
    out = np.zeros_like(p, dtype=np.float64)
    nz = p > 0
    out[nz] = p[nz] * np.log2(p[nz])
    return out
