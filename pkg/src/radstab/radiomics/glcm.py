"""Gray-level co-occurrence matrix features.

Symmetric co-occurrence over the 13 unique distance-1 3D offsets, with two
aggregations: per-offset feature averaging (``avg``) and a single merged
matrix (``mrg``). 25 base features per aggregation.
"""

from __future__ import annotations

import numpy as np

from .texture_common import OFFSETS_13, GrayLevelMatrix, shifted_views, xlogx

FEATURE_NAMES = (
    "joint_maximum", "joint_average", "joint_variance", "joint_entropy",
    "difference_average", "difference_variance", "difference_entropy",
    "sum_average", "sum_variance", "sum_entropy",
    "angular_second_moment", "contrast", "dissimilarity",
    "inverse_difference", "inverse_difference_normalized",
    "inverse_difference_moment", "inverse_difference_moment_normalized",
    "inverse_variance", "correlation", "autocorrelation",
    "cluster_tendency", "cluster_shade", "cluster_prominence",
    "information_correlation_1", "information_correlation_2",
)


def cooccurrence_matrix(levels: np.ndarray, offset, ng: int) -> GrayLevelMatrix:
    """Symmetric co-occurrence counts for one offset (0 = outside ROI)."""
    a, b = shifted_views(levels, offset)
    valid = (a > 0) & (b > 0)
    i = a[valid].ravel() - 1
    j = b[valid].ravel() - 1
    counts = np.zeros((ng, ng), dtype=np.float64)
    np.add.at(counts, (i, j), 1.0)
    np.add.at(counts, (j, i), 1.0)
    return GrayLevelMatrix(family="glcm", counts=counts)


def glcm_features(matrix: GrayLevelMatrix) -> dict[str, float]:
    p = matrix.probabilities
    ng = p.shape[0]
    idx = np.arange(1, ng + 1, dtype=np.float64)
    ii = idx[:, None] * np.ones((1, ng))
    jj = ii.T
    if matrix.total == 0:
        return {name: 0.0 for name in FEATURE_NAMES}

    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mu_x = float((idx * px).sum())
    mu_y = float((idx * py).sum())
    var_x = float(((idx - mu_x) ** 2 * px).sum())
    var_y = float(((idx - mu_y) ** 2 * py).sum())

    # diagonal (difference) and cross-diagonal (sum) projections
    k_diff = np.arange(ng, dtype=np.float64)            # |i-j| = 0..ng-1
    p_diff = np.zeros(ng)
    k_sum = np.arange(2, 2 * ng + 1, dtype=np.float64)  # i+j = 2..2ng
    p_sum = np.zeros(2 * ng - 1)
    for d in range(ng):
        if d == 0:
            p_diff[0] = float(np.trace(p))
        else:
            p_diff[d] = float(np.diagonal(p, offset=d).sum()
                              + np.diagonal(p, offset=-d).sum())
    for s in range(2 * ng - 1):
        p_sum[s] = float(np.fliplr(p).diagonal(offset=ng - 1 - s).sum())

    diff_avg = float((k_diff * p_diff).sum())
    diff_var = float(((k_diff - diff_avg) ** 2 * p_diff).sum())
    diff_ent = float(-xlogx(p_diff).sum())
    sum_avg = float((k_sum * p_sum).sum())
    sum_var = float(((k_sum - sum_avg) ** 2 * p_sum).sum())
    sum_ent = float(-xlogx(p_sum).sum())

    hxy = float(-xlogx(p).sum())
    hx = float(-xlogx(px).sum())
    hy = float(-xlogx(py).sum())
    # cross entropies against the independence surrogate
    pxy = px[:, None] * py[None, :]
    nz = (p > 0) & (pxy > 0)
    hxy1 = float(-(p[nz] * np.log2(pxy[nz])).sum())
    nz2 = pxy > 0
    hxy2 = float(-(pxy[nz2] * np.log2(pxy[nz2])).sum())

    denom_ic1 = max(hx, hy)
    ic1 = (hxy - hxy1) / denom_ic1 if denom_ic1 > 0 else 0.0
    ic2_arg = 1.0 - 2.0 ** (-2.0 * (hxy2 - hxy))
    ic2 = float(np.sqrt(max(0.0, ic2_arg)))

    if var_x > 0 and var_y > 0:
        corr = float(((ii - mu_x) * (jj - mu_y) * p).sum()
                     / np.sqrt(var_x * var_y))
    else:
        corr = 1.0  # single-level limit: degenerate perfect correlation

    inv_var_mask = ii != jj
    with np.errstate(divide="ignore"):
        inv_var = float((p[inv_var_mask]
                         / (ii - jj)[inv_var_mask] ** 2).sum())

    return {
        "joint_maximum": float(p.max()),
        "joint_average": mu_x,
        "joint_variance": var_x,
        "joint_entropy": hxy,
        "difference_average": diff_avg,
        "difference_variance": diff_var,
        "difference_entropy": diff_ent,
        "sum_average": sum_avg,
        "sum_variance": sum_var,
        "sum_entropy": sum_ent,
        "angular_second_moment": float((p ** 2).sum()),
        "contrast": float(((ii - jj) ** 2 * p).sum()),
        "dissimilarity": float((np.abs(ii - jj) * p).sum()),
        "inverse_difference": float((p / (1.0 + np.abs(ii - jj))).sum()),
        "inverse_difference_normalized":
            float((p / (1.0 + np.abs(ii - jj) / ng)).sum()),
        "inverse_difference_moment": float((p / (1.0 + (ii - jj) ** 2)).sum()),
        "inverse_difference_moment_normalized":
            float((p / (1.0 + (ii - jj) ** 2 / ng ** 2)).sum()),
        "inverse_variance": inv_var,
        "correlation": corr,
        "autocorrelation": float((ii * jj * p).sum()),
        "cluster_tendency": float(((ii + jj - mu_x - mu_y) ** 2 * p).sum()),
        "cluster_shade": float(((ii + jj - mu_x - mu_y) ** 3 * p).sum()),
        "cluster_prominence": float(((ii + jj - mu_x - mu_y) ** 4 * p).sum()),
        "information_correlation_1": ic1,
        "information_correlation_2": ic2,
    }


def glcm_family(levels: np.ndarray, ng: int) -> dict[str, float]:
    """Both aggregations over the 13 offsets, prefixed feature ids."""
    per_offset = []
    merged = np.zeros((ng, ng), dtype=np.float64)
    for off in OFFSETS_13:
        m = cooccurrence_matrix(levels, off, ng)
        merged += m.counts
        if m.total > 0:
            per_offset.append(glcm_features(m))
    out = {}
    if per_offset:
        for name in FEATURE_NAMES:
            out[f"glcm_avg_{name}"] = float(
                np.mean([f[name] for f in per_offset]))
    else:
        for name in FEATURE_NAMES:
            out[f"glcm_avg_{name}"] = 0.0
    mrg = glcm_features(GrayLevelMatrix(family="glcm", counts=merged))
    for name in FEATURE_NAMES:
        out[f"glcm_mrg_{name}"] = mrg[name]
    return out
