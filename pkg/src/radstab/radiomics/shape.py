"""Shape and morphology features from the binary mask.

Surface area counts exposed voxel faces; axis lengths come from the
eigenvalues of the spacing-scaled voxel coordinate covariance.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from ..errors import EmptyMask
from ..seg_metrics import surface_voxels
from ..volume_io import MaskVolume

FEATURE_NAMES = (
    "voxel_count", "volume", "surface_area", "surface_to_volume_ratio",
    "sphericity", "compactness1", "compactness2", "spherical_disproportion",
    "max_diameter_3d", "major_axis_length", "minor_axis_length",
    "least_axis_length", "elongation", "flatness", "bbox_volume_ratio",
)


def _face_count(mask: np.ndarray) -> int:
    """Number of foreground faces exposed to background or the border."""
    m = mask.astype(bool)
    padded = np.pad(m, 1, mode="constant")
    exposed = 0
    for axis in range(3):
        for shift in (1, -1):
            nb = np.roll(padded, shift, axis=axis)[1:-1, 1:-1, 1:-1]
            exposed += int((m & ~nb).sum())
    return exposed


def _max_diameter(points: np.ndarray) -> float:
    """Max pairwise distance; reduced via convex hull when large."""
    if len(points) < 2:
        return 0.0
    if len(points) > 400:
        try:
            hull = ConvexHull(points)
            points = points[hull.vertices]
        except Exception:
            pass  # degenerate (coplanar) point sets fall back to brute force
    return float(pdist(points).max())


def shape_features(mask: MaskVolume, spacing=None):
    """Return (features dict keyed shape_*, flags list)."""
    if mask.foreground_count == 0:
        raise EmptyMask("shape_features requires a nonempty mask")
    if spacing is None:
        spacing = mask.header.spacing
    spacing = np.asarray(spacing, dtype=np.float64)
    flags: list[str] = []

    m = mask.voxels.astype(bool)
    n = int(m.sum())
    voxel_vol = float(np.prod(spacing))
    volume = n * voxel_vol

    # exposed faces; face area depends on which axis the face is normal to
    padded = np.pad(m, 1, mode="constant")
    area = 0.0
    face_areas = (spacing[1] * spacing[2], spacing[0] * spacing[2],
                  spacing[0] * spacing[1])
    for axis in range(3):
        for shift in (1, -1):
            nb = np.roll(padded, shift, axis=axis)[1:-1, 1:-1, 1:-1]
            area += face_areas[axis] * int((m & ~nb).sum())

    sphericity = float(np.pi ** (1 / 3) * (6 * volume) ** (2 / 3) / area)
    compactness1 = float(volume / (np.sqrt(np.pi) * area ** 1.5))
    compactness2 = float(36 * np.pi * volume ** 2 / area ** 3)

    surf_pts = surface_voxels(mask).astype(np.float64) * spacing
    max_diam = _max_diameter(surf_pts)

    coords = np.argwhere(m).astype(np.float64) * spacing
    centered = coords - coords.mean(axis=0)
    cov = centered.T @ centered / n
    eig = np.sort(np.linalg.eigvalsh(cov))[::-1]
    eig = np.clip(eig, 0.0, None)
    major, minor, least = (4.0 * np.sqrt(eig)).tolist()
    if eig[0] > 0:
        elongation = float(np.sqrt(eig[1] / eig[0]))
        flatness = float(np.sqrt(eig[2] / eig[0]))
    else:
        elongation = flatness = 1.0
        flags.append("degenerate_axes")

    idx = np.nonzero(m)
    bbox = np.prod([(idx[i].max() - idx[i].min() + 1) * spacing[i]
                    for i in range(3)])
    feats = {
        "voxel_count": float(n), "volume": volume, "surface_area": area,
        "surface_to_volume_ratio": area / volume,
        "sphericity": sphericity, "compactness1": compactness1,
        "compactness2": compactness2,
        "spherical_disproportion": 1.0 / sphericity,
        "max_diameter_3d": max_diam, "major_axis_length": major,
        "minor_axis_length": minor, "least_axis_length": least,
        "elongation": elongation, "flatness": flatness,
        "bbox_volume_ratio": volume / float(bbox),
    }
    return {f"shape_{k}": v for k, v in feats.items()}, flags
