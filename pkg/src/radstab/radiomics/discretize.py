"""ROI gray-level discretization.

``fixed_bin_count`` (the default, 32 bins on ROI min-max) keeps all
discretized features invariant under strictly increasing affine intensity
transforms, which the z-scored inputs require.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMask
from ..volume_io import MaskVolume, Volume3D


@dataclass
class DiscretizationConfig:
    mode: str = "fixed_bin_count"       # or "fixed_bin_width"
    bin_count: int = 32
    bin_width: float = 1.0
    range_policy: str = "roi_min_max"

    def __post_init__(self):
        if self.mode not in ("fixed_bin_count", "fixed_bin_width"):
            raise ValueError(f"unknown discretization mode {self.mode!r}")
        if self.mode == "fixed_bin_count" and self.bin_count < 1:
            raise ValueError("bin_count must be >= 1")
        if self.mode == "fixed_bin_width" and self.bin_width <= 0:
            raise ValueError("bin_width must be > 0")


@dataclass
class DiscretizedROI:
    levels: np.ndarray      # int32 grid, 0 outside ROI, 1..ng inside
    ng: int                 # matrix dimension (number of level slots)
    ng_effective: int       # number of occupied levels
    roi_min: float
    roi_max: float


def discretize(vol: Volume3D, mask: MaskVolume,
               cfg: DiscretizationConfig | None = None) -> DiscretizedROI:
    if cfg is None:
        cfg = DiscretizationConfig()
    roi = mask.voxels.astype(bool)
    if not roi.any():
        raise EmptyMask("discretize requires a nonempty mask")
    x = vol.voxels
    lo = float(x[roi].min())
    hi = float(x[roi].max())

    levels = np.zeros(x.shape, dtype=np.int32)
    if cfg.mode == "fixed_bin_count":
        ng = cfg.bin_count
        if hi == lo:
            levels[roi] = 1
        else:
            lv = 1 + np.floor(ng * (x[roi] - lo) / (hi - lo))
            levels[roi] = np.minimum(ng, lv).astype(np.int32)
    else:
        lv = 1 + np.floor((x[roi] - lo) / cfg.bin_width)
        levels[roi] = lv.astype(np.int32)
        ng = int(levels.max())
    ng_eff = int(np.unique(levels[roi]).size)
    return DiscretizedROI(levels=levels, ng=ng, ng_effective=ng_eff,
                          roi_min=lo, roi_max=hi)
