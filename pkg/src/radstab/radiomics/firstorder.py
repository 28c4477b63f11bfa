"""First-order intensity statistics, histogram and IVH features."""

from __future__ import annotations

import numpy as np

from ..errors import EmptyMask
from ..volume_io import MaskVolume, Volume3D
from .discretize import DiscretizationConfig, discretize

FEATURE_NAMES = (
    "mean", "variance", "skewness", "kurtosis", "median", "minimum",
    "maximum", "range", "percentile10", "percentile90",
    "interquartile_range", "energy", "root_mean_square",
    "mean_absolute_deviation", "robust_mean_absolute_deviation",
    "coefficient_of_variation", "quartile_coefficient_of_dispersion",
    "histogram_entropy", "histogram_uniformity",
    "ivh_v10", "ivh_v90", "ivh_i10", "ivh_i90",
)


def firstorder_features(vol: Volume3D, mask: MaskVolume,
                        cfg: DiscretizationConfig | None = None):
    """Return (features dict keyed fo_*, flags list)."""
    roi = mask.voxels.astype(bool)
    if not roi.any():
        raise EmptyMask("firstorder_features requires a nonempty mask")
    x = vol.voxels[roi].astype(np.float64)
    flags: list[str] = []

    mean = float(x.mean())
    var = float(x.var())           # population variance
    if var > 0:
        sd = np.sqrt(var)
        skew = float(((x - mean) ** 3).mean() / sd ** 3)
        kurt = float(((x - mean) ** 4).mean() / sd ** 4 - 3.0)
    else:
        skew = kurt = 0.0
        flags.append("constant_roi_moments")

    p10, q1, med, q3, p90 = np.percentile(x, [10, 25, 50, 75, 90])
    lo, hi = float(x.min()), float(x.max())
    robust = x[(x >= p10) & (x <= p90)]
    rmad = float(np.abs(robust - robust.mean()).mean()) if robust.size else 0.0
    cov = float(np.sqrt(var) / mean) if mean != 0 else 0.0
    if mean == 0:
        flags.append("cov_zero_mean")
    qcod = float((q3 - q1) / (q3 + q1)) if (q3 + q1) != 0 else 0.0

    disc = discretize(vol, mask, cfg)
    counts = np.bincount(disc.levels[roi], minlength=disc.ng + 1)[1:]
    p = counts / counts.sum()
    nz = p > 0
    hist_entropy = float(-(p[nz] * np.log2(p[nz])).sum())
    hist_uniformity = float((p ** 2).sum())

    # intensity-volume histogram subset on the ROI intensity range
    if hi > lo:
        t10 = lo + 0.10 * (hi - lo)
        t90 = lo + 0.90 * (hi - lo)
        v10 = float((x >= t10).mean())
        v90 = float((x >= t90).mean())
    else:
        v10 = v90 = 1.0
    i10 = float(np.percentile(x, 90))   # intensity reached by top 10% volume
    i90 = float(np.percentile(x, 10))

    feats = {
        "mean": mean, "variance": var, "skewness": skew, "kurtosis": kurt,
        "median": float(med), "minimum": lo, "maximum": hi,
        "range": hi - lo, "percentile10": float(p10),
        "percentile90": float(p90), "interquartile_range": float(q3 - q1),
        "energy": float((x ** 2).sum()),
        "root_mean_square": float(np.sqrt((x ** 2).mean())),
        "mean_absolute_deviation": float(np.abs(x - mean).mean()),
        "robust_mean_absolute_deviation": rmad,
        "coefficient_of_variation": cov,
        "quartile_coefficient_of_dispersion": qcod,
        "histogram_entropy": hist_entropy,
        "histogram_uniformity": hist_uniformity,
        "ivh_v10": v10, "ivh_v90": v90, "ivh_i10": i10, "ivh_i90": i90,
    }
    return {f"fo_{k}": v for k, v in feats.items()}, flags
