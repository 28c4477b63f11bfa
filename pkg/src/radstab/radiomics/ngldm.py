"""Neighboring gray-level dependence matrix features.

Dependence of a voxel = 1 + number of 26-neighbors inside the ROI with an
equal level (coarseness parameter alpha = 0, Chebyshev radius 1). The
matrix counts voxels per (level, dependence).
"""

from __future__ import annotations

import numpy as np

from .texture_common import OFFSETS_26, GrayLevelMatrix, shifted_views

FEATURE_NAMES = (
    "low_dependence_emphasis", "high_dependence_emphasis",
    "low_gray_level_count_emphasis", "high_gray_level_count_emphasis",
    "low_dependence_low_gray_level_emphasis",
    "low_dependence_high_gray_level_emphasis",
    "high_dependence_low_gray_level_emphasis",
    "high_dependence_high_gray_level_emphasis",
    "gray_level_non_uniformity", "gray_level_non_uniformity_normalized",
    "dependence_count_non_uniformity",
    "dependence_count_non_uniformity_normalized",
    "dependence_count_percentage", "gray_level_variance",
    "dependence_count_variance", "dependence_count_entropy",
)


def dependence_matrix(levels: np.ndarray, ng: int) -> GrayLevelMatrix:
    roi = levels > 0
    dep = np.zeros(levels.shape, dtype=np.int64)
    for off in OFFSETS_26:
        d_a, _ = shifted_views(dep, off)
        lv_a, lv_b = shifted_views(levels, off)
        _, roi_b = shifted_views(roi, off)
        d_a += (roi_b & (lv_b == lv_a))
    counts = np.zeros((ng, 27), dtype=np.float64)
    np.add.at(counts, (levels[roi] - 1, dep[roi]), 1.0)
    return GrayLevelMatrix(family="ngldm", counts=counts)


def ngldm_family(levels: np.ndarray, ng: int) -> dict[str, float]:
    m = dependence_matrix(levels, ng).counts
    total = m.sum()
    n_voxels = int((levels > 0).sum())
    if total == 0:
        return {f"ngldm_{k}": 0.0 for k in FEATURE_NAMES}
    i = np.arange(1, m.shape[0] + 1, dtype=np.float64)
    j = np.arange(1, m.shape[1] + 1, dtype=np.float64)  # dependence = k+1
    g = m.sum(axis=1)
    dcol = m.sum(axis=0)
    p = m / total
    mu_i = (i * g / total).sum()
    mu_j = (j * dcol / total).sum()
    nz = p > 0
    vals = (
        float((dcol / j ** 2).sum() / total),
        float((dcol * j ** 2).sum() / total),
        float((g / i ** 2).sum() / total),
        float((g * i ** 2).sum() / total),
        float((m / (i[:, None] ** 2 * j[None, :] ** 2)).sum() / total),
        float((m * i[:, None] ** 2 / j[None, :] ** 2).sum() / total),
        float((m * j[None, :] ** 2 / i[:, None] ** 2).sum() / total),
        float((m * i[:, None] ** 2 * j[None, :] ** 2).sum() / total),
        float((g ** 2).sum() / total),
        float((g ** 2).sum() / total ** 2),
        float((dcol ** 2).sum() / total),
        float((dcol ** 2).sum() / total ** 2),
        float(total / n_voxels),
        float(((i[:, None] - mu_i) ** 2 * p).sum()),
        float(((j[None, :] - mu_j) ** 2 * p).sum()),
        float(-(p[nz] * np.log2(p[nz])).sum()),
    )
    return {f"ngldm_{k}": v for k, v in zip(FEATURE_NAMES, vals)}
