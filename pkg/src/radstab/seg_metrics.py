"""Geometric segmentation metrics: Dice, IoU, Hausdorff (and HD95)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimMismatch, EmptyMask
from .volume_io import MaskVolume


@dataclass
class GeometricScores:
    dice: float
    iou: float
    hausdorff: float
    hd95: float
    flags: list[str] = field(default_factory=list)


@dataclass
class BatchScoreSummary:
    n_cases: int
    mean: dict[str, float]
    std: dict[str, float]          # population std
    per_case: list[dict]           # case_id, scores or error


def _check_dims(a: MaskVolume, b: MaskVolume) -> None:
    if a.header.dims != b.header.dims:
        raise DimMismatch(f"{a.header.dims} vs {b.header.dims}")


def _overlap_counts(a: MaskVolume, b: MaskVolume):
    av = a.voxels.astype(bool)
    bv = b.voxels.astype(bool)
    return int(av.sum()), int(bv.sum()), int((av & bv).sum())


def dice(a: MaskVolume, b: MaskVolume) -> float:
    """2|A∩B| / (|A|+|B|); both-empty -> 1.0 by convention."""
    _check_dims(a, b)
    na, nb, ni = _overlap_counts(a, b)
    if na + nb == 0:
        return 1.0
    return 2.0 * ni / (na + nb)


def iou(a: MaskVolume, b: MaskVolume) -> float:
    """|A∩B| / |A∪B|; both-empty -> 1.0 by convention."""
    _check_dims(a, b)
    na, nb, ni = _overlap_counts(a, b)
    union = na + nb - ni
    if union == 0:
        return 1.0
    return ni / union


def surface_voxels(mask: MaskVolume) -> np.ndarray:
    """Coordinates (n, 3) of foreground voxels with a background 6-neighbor
    or lying on the grid border."""
    m = mask.voxels.astype(bool)
    padded = np.pad(m, 1, mode="constant")
    interior = np.ones_like(m)
    for axis in range(3):
        for shift in (1, -1):
            interior &= np.roll(padded, shift, axis=axis)[1:-1, 1:-1, 1:-1]
    surf = m & ~interior
    return np.argwhere(surf)


def hausdorff(a: MaskVolume, b: MaskVolume, percentile: float = 100.0,
              spacing=None) -> float:
    """Symmetric (percentile) Hausdorff over surface voxels, voxel units
    unless ``spacing`` is given (mm)."""
    _check_dims(a, b)
    if a.foreground_count == 0 or b.foreground_count == 0:
        raise EmptyMask("hausdorff requires two nonempty masks")
    pa = surface_voxels(a).astype(np.float64)
    pb = surface_voxels(b).astype(np.float64)
    if spacing is not None:
        pa = pa * np.asarray(spacing, dtype=np.float64)
        pb = pb * np.asarray(spacing, dtype=np.float64)
    d_ab = cKDTree(pb).query(pa, k=1)[0]
    d_ba = cKDTree(pa).query(pb, k=1)[0]
    pooled = np.concatenate([d_ab, d_ba])
    if percentile >= 100.0:
        return float(pooled.max())
    return float(np.percentile(pooled, percentile))


def score_pair(gt: MaskVolume, cand: MaskVolume, spacing=None) -> GeometricScores:
    flags = []
    d = dice(gt, cand)
    j = iou(gt, cand)
    if gt.foreground_count == 0 and cand.foreground_count == 0:
        flags.append("both_empty_overlap_convention")
    if gt.foreground_count == 0 or cand.foreground_count == 0:
        raise EmptyMask("hausdorff undefined for empty mask")
    hd = hausdorff(gt, cand, 100.0, spacing=spacing)
    h95 = hausdorff(gt, cand, 95.0, spacing=spacing)
    return GeometricScores(dice=d, iou=j, hausdorff=hd, hd95=h95, flags=flags)


METRIC_NAMES = ("dice", "iou", "hausdorff", "hd95")


def evaluate_batch(cases: list[tuple[str, MaskVolume, MaskVolume]],
                   spacing=None) -> BatchScoreSummary:
    """Score (case_id, gt, candidate) triples; per-case errors are isolated
    into an ``error`` column and excluded from the summary."""
    if not cases:
        raise ValueError("evaluate_batch requires at least one case")
    per_case = []
    valid = []
    for case_id, gt, cand in cases:
        try:
            s = score_pair(gt, cand, spacing=spacing)
        except (DimMismatch, EmptyMask) as exc:
            per_case.append({"case_id": case_id, "error": str(exc)})
            continue
        row = {"case_id": case_id, "dice": s.dice, "iou": s.iou,
               "hausdorff": s.hausdorff, "hd95": s.hd95,
               "flags": ";".join(s.flags)}
        per_case.append(row)
        valid.append(row)
    mean, std = {}, {}
    for name in METRIC_NAMES:
        vals = np.array([r[name] for r in valid], dtype=np.float64)
        mean[name] = float(vals.mean()) if vals.size else float("nan")
        std[name] = float(vals.std()) if vals.size else float("nan")
    return BatchScoreSummary(n_cases=len(valid), mean=mean, std=std,
                             per_case=per_case)
