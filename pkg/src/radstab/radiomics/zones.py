"""Size-zone and distance-zone matrix features.

Zones are 26-connected components of equal gray level. The GLDZM distance
of a zone is the minimum over its voxels of the Chebyshev distance to the
ROI border (voxels touching background or the grid edge have distance 1).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .texture_common import GrayLevelMatrix

_STRUCT26 = ndimage.generate_binary_structure(3, 3)

GLSZM_NAMES = (
    "small_zone_emphasis", "large_zone_emphasis",
    "low_gray_level_zone_emphasis", "high_gray_level_zone_emphasis",
    "small_zone_low_gray_level_emphasis",
    "small_zone_high_gray_level_emphasis",
    "large_zone_low_gray_level_emphasis",
    "large_zone_high_gray_level_emphasis",
    "gray_level_non_uniformity", "gray_level_non_uniformity_normalized",
    "zone_size_non_uniformity", "zone_size_non_uniformity_normalized",
    "zone_percentage", "gray_level_variance", "zone_size_variance",
    "zone_size_entropy",
)

GLDZM_NAMES = tuple(n.replace("zone_size", "zone_distance")
                     .replace("small_zone", "small_distance")
                     .replace("large_zone", "large_distance")
                    for n in GLSZM_NAMES)


def zone_list(levels: np.ndarray) -> list[tuple[int, int, np.ndarray]]:
    """All zones as (level, size, member coordinates)."""
    zones = []
    for lvl in np.unique(levels[levels > 0]):
        labeled, k = ndimage.label(levels == lvl, structure=_STRUCT26)
        for obj_idx, sl in enumerate(ndimage.find_objects(labeled), start=1):
            coords = np.argwhere(labeled[sl] == obj_idx)
            coords += [s.start for s in sl]
            zones.append((int(lvl), len(coords), coords))
    return zones


def border_distance_map(levels: np.ndarray) -> np.ndarray:
    """Chebyshev distance to the nearest non-ROI voxel (grid edge counts)."""
    roi = levels > 0
    padded = np.pad(roi, 1, mode="constant")
    dist = ndimage.distance_transform_cdt(padded, metric="chessboard")
    return dist[1:-1, 1:-1, 1:-1]


def size_zone_matrix(levels: np.ndarray, ng: int) -> GrayLevelMatrix:
    zones = zone_list(levels)
    max_size = max((s for _, s, _ in zones), default=1)
    counts = np.zeros((ng, max_size), dtype=np.float64)
    for lvl, size, _ in zones:
        counts[lvl - 1, size - 1] += 1.0
    return GrayLevelMatrix(family="glszm", counts=counts)


def distance_zone_matrix(levels: np.ndarray, ng: int) -> GrayLevelMatrix:
    zones = zone_list(levels)
    dmap = border_distance_map(levels)
    dists = [int(dmap[tuple(coords.T)].min()) for _, _, coords in zones]
    max_d = max(dists, default=1)
    counts = np.zeros((ng, max_d), dtype=np.float64)
    for (lvl, _, _), d in zip(zones, dists):
        counts[lvl - 1, d - 1] += 1.0
    return GrayLevelMatrix(family="gldzm", counts=counts)


def _zone_features(matrix: GrayLevelMatrix, n_voxels: int,
                   names) -> dict[str, float]:
    m = matrix.counts
    total = m.sum()
    if total == 0:
        return {n: 0.0 for n in names}
    i = np.arange(1, m.shape[0] + 1, dtype=np.float64)
    j = np.arange(1, m.shape[1] + 1, dtype=np.float64)
    g = m.sum(axis=1)
    z = m.sum(axis=0)
    p = m / total
    mu_i = (i * g / total).sum()
    mu_j = (j * z / total).sum()
    nz = p > 0
    vals = (
        float((z / j ** 2).sum() / total),
        float((z * j ** 2).sum() / total),
        float((g / i ** 2).sum() / total),
        float((g * i ** 2).sum() / total),
        float((m / (i[:, None] ** 2 * j[None, :] ** 2)).sum() / total),
        float((m * i[:, None] ** 2 / j[None, :] ** 2).sum() / total),
        float((m * j[None, :] ** 2 / i[:, None] ** 2).sum() / total),
        float((m * i[:, None] ** 2 * j[None, :] ** 2).sum() / total),
        float((g ** 2).sum() / total),
        float((g ** 2).sum() / total ** 2),
        float((z ** 2).sum() / total),
        float((z ** 2).sum() / total ** 2),
        float(total / n_voxels),
        float(((i[:, None] - mu_i) ** 2 * p).sum()),
        float(((j[None, :] - mu_j) ** 2 * p).sum()),
        float(-(p[nz] * np.log2(p[nz])).sum()),
    )
    return dict(zip(names, vals))


def glszm_family(levels: np.ndarray, ng: int) -> dict[str, float]:
    n_voxels = int((levels > 0).sum())
    feats = _zone_features(size_zone_matrix(levels, ng), n_voxels, GLSZM_NAMES)
    return {f"glszm_{k}": v for k, v in feats.items()}


def gldzm_family(levels: np.ndarray, ng: int) -> dict[str, float]:
    n_voxels = int((levels > 0).sum())
    feats = _zone_features(distance_zone_matrix(levels, ng), n_voxels,
                           GLDZM_NAMES)
    return {f"gldzm_{k}": v for k, v in feats.items()}
