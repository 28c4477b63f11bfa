"""Preprocessing chain: normalize, binarize, resample, label, crop.

Default pipeline order (configurable via ``zscore_stage``):
binarize -> resample image (trilinear) and mask (nearest) to the target
grid -> largest connected component -> crop with margin -> z-score on the
cropped image. Margins are clamped at volume borders, never padded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyMask
from .volume_io import MaskVolume, Volume3D, VolumeHeader


@dataclass
class CropRegion:
    lo: tuple[int, int, int]      # inclusive
    hi: tuple[int, int, int]      # exclusive
    source_dims: tuple[int, int, int]
    margin: int

    def __post_init__(self):
        for i in range(3):
            if not (0 <= self.lo[i] < self.hi[i] <= self.source_dims[i]):
                raise ValueError(f"invalid crop region {self.lo}..{self.hi} "
                                 f"in {self.source_dims}")


@dataclass
class ComponentLabeling:
    labels: np.ndarray                 # int grid, 0 = background
    component_sizes: dict[int, int]    # label -> voxel count

    @property
    def n_components(self) -> int:
        return len(self.component_sizes)


def zscore_normalize(vol: Volume3D) -> Volume3D:
    """Per-volume z-score; constant input returns zeros with a warning flag."""
    v = vol.voxels
    mean = float(v.mean())
    std = float(v.std())
    if std == 0.0:
        out = Volume3D(header=vol.header, voxels=np.zeros_like(v),
                       warnings=list(vol.warnings))
        out.warnings.append("constant_volume_zscore")
        return out
    return Volume3D(header=vol.header, voxels=(v - mean) / std,
                    warnings=list(vol.warnings))


def binarize_mask(vol: Volume3D | MaskVolume, threshold: float = 0.5) -> MaskVolume:
    return MaskVolume(header=vol.header,
                      voxels=(np.asarray(vol.voxels, dtype=np.float64)
                              > threshold).astype(np.uint8))


def _cell_centered_coords(src_dims, target_dims):
    """Source sampling coordinates for each target axis, clamped in-range."""
    axes = []
    for s, t in zip(src_dims, target_dims):
        c = (np.arange(t) + 0.5) * (s / t) - 0.5
        axes.append(np.clip(c, 0.0, s - 1))
    return np.meshgrid(*axes, indexing="ij")

def _resampled_header(header: VolumeHeader, target_dims) -> VolumeHeader:
    spacing = tuple(sp * s / t for sp, s, t
                    in zip(header.spacing, header.dims, target_dims))
    return VolumeHeader(dims=tuple(target_dims), spacing=spacing,
                        datatype=header.datatype)


def resample_trilinear(vol: Volume3D, target_dims) -> Volume3D:
    coords = _cell_centered_coords(vol.header.dims, target_dims)
    out = ndimage.map_coordinates(vol.voxels, np.stack(coords), order=1,
                                  mode="nearest")
    return Volume3D(header=_resampled_header(vol.header, target_dims),
                    voxels=out, warnings=list(vol.warnings))


def resample_mask_nearest(mask: MaskVolume, target_dims) -> MaskVolume:
    coords = _cell_centered_coords(mask.header.dims, target_dims)
    out = ndimage.map_coordinates(mask.voxels, np.stack(coords), order=0,
                                  mode="nearest")
    return MaskVolume(header=_resampled_header(mask.header, target_dims),
                      voxels=out.astype(np.uint8))


_STRUCTURES = {6: 1, 18: 2, 26: 3}


def connected_components_3d(mask: MaskVolume, connectivity: int = 26) -> ComponentLabeling:
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be one of {set(_STRUCTURES)}")
    structure = ndimage.generate_binary_structure(3, _STRUCTURES[connectivity])
    labels, k = ndimage.label(mask.voxels, structure=structure)
    counts = np.bincount(labels.ravel(), minlength=k + 1)
    sizes = {lab: int(counts[lab]) for lab in range(1, k + 1)}
    return ComponentLabeling(labels=labels, component_sizes=sizes)


def crop_roi(vol: Volume3D, mask: MaskVolume, margin: int = 5,
             connectivity: int = 26) -> tuple[Volume3D, MaskVolume, CropRegion]:
    """Crop image+mask to the largest component's bbox plus ``margin``.

    Ties between equal-sized components break toward the lowest label.
    The cropped mask keeps only the largest component.
    """
    if mask.foreground_count == 0:
        raise EmptyMask("crop_roi requires a nonempty mask")
    labeling = connected_components_3d(mask, connectivity)
    labels = sorted(labeling.component_sizes)
    sizes = np.array([labeling.component_sizes[lab] for lab in labels])
    largest = labels[int(np.argmax(sizes))]
    comp = labeling.labels == largest

    idx = np.nonzero(comp)
    dims = mask.header.dims
    lo = tuple(max(0, int(idx[i].min()) - margin) for i in range(3))
    hi = tuple(min(dims[i], int(idx[i].max()) + 1 + margin) for i in range(3))
    region = CropRegion(lo=lo, hi=hi, source_dims=dims, margin=margin)

    sl = tuple(slice(lo[i], hi[i]) for i in range(3))
    new_dims = tuple(hi[i] - lo[i] for i in range(3))
    header = VolumeHeader(dims=new_dims, spacing=vol.header.spacing,
                          datatype=vol.header.datatype)
    cropped_vol = Volume3D(header=header, voxels=vol.voxels[sl],
                           warnings=list(vol.warnings))
    cropped_mask = MaskVolume(header=header,
                              voxels=comp[sl].astype(np.uint8))
    return cropped_vol, cropped_mask, region


def preprocess_case(vol: Volume3D, mask_raw: Volume3D | MaskVolume,
                    target_dims=(64, 64, 64), margin: int = 5,
                    connectivity: int = 26, zscore_stage: str = "cropped"):
    """Full chain for one image/mask pair.

    Returns (cropped image, cropped mask, CropRegion). ``zscore_stage`` is
    either ``whole`` (normalize before resampling) or ``cropped`` (after
    cropping, tumor-local statistics; the default).
    """
    if zscore_stage not in ("whole", "cropped"):
        raise ValueError(f"unknown zscore_stage {zscore_stage!r}")
    if zscore_stage == "whole":
        vol = zscore_normalize(vol)
    mask = binarize_mask(mask_raw)
    vol = resample_trilinear(vol, target_dims)
    mask = resample_mask_nearest(mask, target_dims)
    cropped_vol, cropped_mask, region = crop_roi(vol, mask, margin=margin,
                                                 connectivity=connectivity)
    if zscore_stage == "cropped":
        cropped_vol = zscore_normalize(cropped_vol)
    return cropped_vol, cropped_mask, region
