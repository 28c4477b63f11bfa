"""Gray-level run-length matrix features (13 directions, avg + merged)."""

from __future__ import annotations

import numpy as np

from .texture_common import OFFSETS_13, GrayLevelMatrix

FEATURE_NAMES = (
    "short_run_emphasis", "long_run_emphasis",
    "low_gray_level_run_emphasis", "high_gray_level_run_emphasis",
    "short_run_low_gray_level_emphasis", "short_run_high_gray_level_emphasis",
    "long_run_low_gray_level_emphasis", "long_run_high_gray_level_emphasis",
    "gray_level_non_uniformity", "gray_level_non_uniformity_normalized",
    "run_length_non_uniformity", "run_length_non_uniformity_normalized",
    "run_percentage", "gray_level_variance", "run_length_variance",
    "run_entropy",
)


def _in_bounds(pos: np.ndarray, shape) -> np.ndarray:
    ok = np.ones(len(pos), dtype=bool)
    for ax in range(3):
        ok &= (pos[:, ax] >= 0) & (pos[:, ax] < shape[ax])
    return ok


def run_length_matrix(levels: np.ndarray, direction, max_len: int) -> GrayLevelMatrix:
    """Counts of maximal same-level runs along one direction.

    Matrix shape (ng, max_len); a run of length l increments column l-1.
    """
    ng = int(levels.max())
    counts = np.zeros((max(ng, 1), max_len), dtype=np.float64)
    d = np.asarray(direction)
    shape = levels.shape

    fg = np.argwhere(levels > 0)
    if len(fg) == 0:
        return GrayLevelMatrix(family="glrlm", counts=counts)
    prev = fg - d
    prev_ok = _in_bounds(prev, shape)
    same_prev = np.zeros(len(fg), dtype=bool)
    same_prev[prev_ok] = (levels[tuple(prev[prev_ok].T)]
                          == levels[tuple(fg[prev_ok].T)])
    starts = fg[~same_prev]
    start_levels = levels[tuple(starts.T)]

    lengths = np.ones(len(starts), dtype=np.int64)
    pos = starts.copy()
    alive = np.ones(len(starts), dtype=bool)
    while alive.any():
        nxt = pos[alive] + d
        ok = _in_bounds(nxt, shape)
        same = np.zeros(len(nxt), dtype=bool)
        same[ok] = (levels[tuple(nxt[ok].T)]
                    == levels[tuple(pos[alive][ok].T)])
        idx = np.flatnonzero(alive)
        cont = idx[same]
        alive[:] = False
        alive[cont] = True
        pos[cont] += d
        lengths[cont] += 1

    np.add.at(counts, (start_levels - 1, lengths - 1), 1.0)
    return GrayLevelMatrix(family="glrlm", counts=counts)


def rlm_features(matrix: GrayLevelMatrix, n_voxels: int,
                 prefix: str = "") -> dict[str, float]:
    r = matrix.counts
    total = r.sum()
    if total == 0:
        return {prefix + n: 0.0 for n in FEATURE_NAMES}
    i = np.arange(1, r.shape[0] + 1, dtype=np.float64)
    j = np.arange(1, r.shape[1] + 1, dtype=np.float64)
    g = r.sum(axis=1)
    rl = r.sum(axis=0)
    p = r / total
    mu_i = (i * g / total).sum()
    mu_j = (j * rl / total).sum()
    nz = p > 0
    return {
        prefix + "short_run_emphasis": float((rl / j ** 2).sum() / total),
        prefix + "long_run_emphasis": float((rl * j ** 2).sum() / total),
        prefix + "low_gray_level_run_emphasis":
            float((g / i ** 2).sum() / total),
        prefix + "high_gray_level_run_emphasis":
            float((g * i ** 2).sum() / total),
        prefix + "short_run_low_gray_level_emphasis":
            float((r / (i[:, None] ** 2 * j[None, :] ** 2)).sum() / total),
        prefix + "short_run_high_gray_level_emphasis":
            float((r * i[:, None] ** 2 / j[None, :] ** 2).sum() / total),
        prefix + "long_run_low_gray_level_emphasis":
            float((r * j[None, :] ** 2 / i[:, None] ** 2).sum() / total),
        prefix + "long_run_high_gray_level_emphasis":
            float((r * i[:, None] ** 2 * j[None, :] ** 2).sum() / total),
        prefix + "gray_level_non_uniformity": float((g ** 2).sum() / total),
        prefix + "gray_level_non_uniformity_normalized":
            float((g ** 2).sum() / total ** 2),
        prefix + "run_length_non_uniformity": float((rl ** 2).sum() / total),
        prefix + "run_length_non_uniformity_normalized":
            float((rl ** 2).sum() / total ** 2),
        prefix + "run_percentage": float(total / n_voxels),
        prefix + "gray_level_variance":
            float(((i[:, None] - mu_i) ** 2 * p).sum()),
        prefix + "run_length_variance":
            float(((j[None, :] - mu_j) ** 2 * p).sum()),
        prefix + "run_entropy": float(-(p[nz] * np.log2(p[nz])).sum()),
    }


def glrlm_family(levels: np.ndarray, ng: int) -> dict[str, float]:
    n_voxels = int((levels > 0).sum())
    max_len = max(levels.shape)
    per_dir = []
    merged = np.zeros((ng, max_len), dtype=np.float64)
    for d in OFFSETS_13:
        m = run_length_matrix(levels, d, max_len)
        mat = np.zeros((ng, max_len))
        mat[:m.counts.shape[0], :] = m.counts
        merged += mat
        per_dir.append(rlm_features(
            GrayLevelMatrix(family="glrlm", counts=mat), n_voxels))
    out = {}
    for name in FEATURE_NAMES:
        out[f"glrlm_avg_{name}"] = float(np.mean([f[name] for f in per_dir]))
    mrg = rlm_features(GrayLevelMatrix(family="glrlm", counts=merged),
                       n_voxels)
    for name in FEATURE_NAMES:
        out[f"glrlm_mrg_{name}"] = mrg[name]
    return out
