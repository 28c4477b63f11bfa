"""Neighborhood gray-tone difference matrix features.

For each ROI voxel with at least one ROI neighbor (26-neighborhood), the
absolute difference between its level and the mean level of those
neighbors accumulates into s_i. Coarseness is capped at 1e6 for constant
ROIs.
"""

from __future__ import annotations

import numpy as np

from .texture_common import OFFSETS_26, shifted_views

COARSENESS_CAP = 1e6

FEATURE_NAMES = ("coarseness", "contrast", "busyness", "complexity",
                 "strength")


def ngtdm_components(levels: np.ndarray, ng: int):
    """Return (n_i counts, s_i sums) indexed by level-1."""
    roi = levels > 0
    nb_sum = np.zeros(levels.shape, dtype=np.float64)
    nb_cnt = np.zeros(levels.shape, dtype=np.float64)
    for off in OFFSETS_26:
        a_sum, _ = shifted_views(nb_sum, off)
        a_cnt, _ = shifted_views(nb_cnt, off)
        _, lv_b = shifted_views(levels, off)
        _, roi_b = shifted_views(roi, off)
        a_sum += lv_b * roi_b
        a_cnt += roi_b

    valid = roi & (nb_cnt > 0)
    lv = levels[valid].astype(np.float64)
    avg = nb_sum[valid] / nb_cnt[valid]
    diff = np.abs(lv - avg)

    n = np.zeros(ng, dtype=np.float64)
    s = np.zeros(ng, dtype=np.float64)
    np.add.at(n, levels[valid] - 1, 1.0)
    np.add.at(s, levels[valid] - 1, diff)
    return n, s


def ngtdm_family(levels: np.ndarray, ng: int) -> dict[str, float]:
    n, s = ngtdm_components(levels, ng)
    nvc = n.sum()
    if nvc == 0:
        return {f"ngtdm_{k}": 0.0 for k in FEATURE_NAMES}
    p = n / nvc
    i = np.arange(1, ng + 1, dtype=np.float64)
    occ = p > 0
    ngp = int(occ.sum())

    ps = float((p * s).sum())
    coarseness = min(COARSENESS_CAP, 1.0 / ps) if ps > 0 else COARSENESS_CAP

    if ngp > 1:
        pi, pj = p[occ][:, None], p[occ][None, :]
        li, lj = i[occ][:, None], i[occ][None, :]
        contrast = float((pi * pj * (li - lj) ** 2).sum()
                         / (ngp * (ngp - 1)) * s.sum() / nvc)
        busy_den = float(np.abs(li * pi - lj * pj).sum())
        busyness = ps / busy_den if busy_den > 0 else 0.0
        si, sj = s[occ][:, None], s[occ][None, :]
        complexity = float((np.abs(li - lj)
                            * (pi * si + pj * sj) / (pi + pj)).sum() / nvc)
        strength = (float(((pi + pj) * (li - lj) ** 2).sum() / s.sum())
                    if s.sum() > 0 else 0.0)
    else:
        contrast = busyness = complexity = strength = 0.0

    return {"ngtdm_coarseness": coarseness, "ngtdm_contrast": contrast,
            "ngtdm_busyness": busyness, "ngtdm_complexity": complexity,
            "ngtdm_strength": strength}
