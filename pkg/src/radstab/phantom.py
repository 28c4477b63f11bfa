"""Synthetic cohort generator: textured ellipsoid tumors with a planted
survival signal, plus controlled mask perturbations emulating imperfect
automated segmentations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import EmptyMask, ErosionExtinction
from .volume_io import MaskVolume, Volume3D, VolumeHeader

PERTURBATION_KINDS = ("dilate", "erode", "translate", "boundary_flip",
                      "hybrid")


@dataclass
class PhantomSpec:
    seed: int = 0
    n_cases: int = 20
    dims: tuple[int, int, int] = (64, 64, 64)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    radius_range: tuple[float, float] = (6.0, 14.0)
    texture_sigma: float = 1.5     # correlation length of the smoothed noise
    noise_sd: float = 0.3
    tumor_offset: float = 1.0      # intensity lift inside the tumor
    # logistic survival signal on standardized (volume, mean intensity)
    signal_volume_weight: float = 2.0
    signal_intensity_weight: float = 1.0
    signal_bias: float = 0.0
    margin: int = 2

    def __post_init__(self):
        if self.n_cases < 1:
            raise ValueError("n_cases must be positive")
        lo, hi = self.radius_range
        if hi + self.margin >= min(self.dims) / 2:
            raise ValueError("radius range does not fit within the grid")
        if lo <= 0 or hi < lo:
            raise ValueError("invalid radius range")


def _header(spec: PhantomSpec, datatype: str = "f64") -> VolumeHeader:
    return VolumeHeader(dims=spec.dims, spacing=spec.spacing,
                        datatype=datatype)


def _ellipsoid_mask(dims, center, radii) -> np.ndarray:
    grids = np.indices(dims, dtype=np.float64)
    q = sum(((g - c) / r) ** 2 for g, c, r in zip(grids, center, radii))
    return (q <= 1.0).astype(np.uint8)


def _smooth_noise(rng: np.random.Generator, dims, sigma: float,
                  sd: float) -> np.ndarray:
    white = rng.standard_normal(dims)
    smooth = ndimage.gaussian_filter(white, sigma=sigma, mode="reflect")
    s = smooth.std()
    return smooth * (sd / s) if s > 0 else smooth


def generate_case(spec: PhantomSpec, index: int):
    """Deterministic per (spec.seed, index). Returns (image, mask,
    survival_years)."""
    rng = np.random.default_rng([spec.seed, index])
    lo, hi = spec.radius_range
    radii = rng.uniform(lo, hi, size=3)
    center = [rng.uniform(r + spec.margin, d - 1 - r - spec.margin)
              for r, d in zip(radii, spec.dims)]
    mask = _ellipsoid_mask(spec.dims, center, radii)
    image = _smooth_noise(rng, spec.dims, spec.texture_sigma, spec.noise_sd)
    intensity_scale = rng.uniform(0.7, 1.3)
    image = image + spec.tumor_offset * intensity_scale * mask

    # standardized signal features with known population ranges
    mid = (lo + hi) / 2
    vol_z = (np.prod(radii) - mid ** 3) / (mid ** 3 * 0.5)
    int_z = (intensity_scale - 1.0) / 0.3
    logit = (spec.signal_volume_weight * vol_z
             + spec.signal_intensity_weight * int_z + spec.signal_bias)
    p_long = 1.0 / (1.0 + math.exp(-logit))
    long_survivor = rng.random() < p_long
    survival_years = (4.0 + rng.uniform(0.5, 6.0) if long_survivor
                      else rng.uniform(0.2, 3.8))

    header = _header(spec)
    return (Volume3D(voxels=image, header=header),
            MaskVolume(voxels=mask, header=_header(spec, "u8")),
            float(survival_years))


def generate_cohort(spec: PhantomSpec):
    """All cases plus a class-balance check on the planted signal."""
    cases = [generate_case(spec, i) for i in range(spec.n_cases)]
    balance = float(np.mean([1.0 if s > 4.0 else 0.0 for _, _, s in cases]))
    if spec.n_cases >= 20 and not (0.3 <= balance <= 0.7):
        raise ValueError(
            f"signal weights produce class balance {balance:.2f} "
            "outside [0.3, 0.7]")
    return cases


@dataclass
class PerturbationSpec:
    kind: str
    magnitude: float = 1.0   # voxels, or flip probability for boundary_flip
    seed: int = 0
    flip_probability: float | None = None
    offset: tuple[int, int, int] | None = None

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")


def _chebyshev_ball(radius: int) -> np.ndarray:
    size = 2 * radius + 1
    return np.ones((size, size, size), dtype=bool)


def _surface(mask: np.ndarray) -> np.ndarray:
    eroded = ndimage.binary_erosion(mask.astype(bool),
                                    structure=ndimage.generate_binary_structure(3, 1),
                                    border_value=0)
    return mask.astype(bool) & ~eroded


def _translate(mask: np.ndarray, offset, rng=None) -> np.ndarray:
    out = np.zeros_like(mask)
    idx = np.argwhere(mask > 0)
    if len(idx) == 0:
        return out
    off = np.asarray(offset, dtype=np.int64)
    # clamp the offset so the whole mask stays on the grid
    for ax in range(3):
        lo = idx[:, ax].min()
        hi = idx[:, ax].max()
        off[ax] = max(-lo, min(off[ax], mask.shape[ax] - 1 - hi))
    moved = idx + off
    out[moved[:, 0], moved[:, 1], moved[:, 2]] = 1
    return out


def perturb_mask(mask: MaskVolume, pspec: PerturbationSpec) -> MaskVolume:
    m = mask.voxels.astype(bool)
    if not m.any():
        raise EmptyMask("cannot perturb an empty mask")
    rng = np.random.default_rng(pspec.seed)
    mag = int(round(pspec.magnitude))
    kind = pspec.kind

    def dilate(a, r):
        return ndimage.binary_dilation(a, structure=_chebyshev_ball(r)) \
            if r > 0 else a

    def erode(a, r):
        if r <= 0:
            return a
        out = ndimage.binary_erosion(a, structure=_chebyshev_ball(r),
                                     border_value=0)
        if not out.any():
            raise ErosionExtinction(f"erosion radius {r} empties the mask")
        return out

    def flip(a, p):
        if p <= 0:
            return a
        surf = _surface(a)
        # outer boundary: background voxels 6-adjacent to the mask
        outer = ndimage.binary_dilation(
            a, structure=ndimage.generate_binary_structure(3, 1)) & ~a
        cand = surf | outer
        flips = cand & (rng.random(a.shape) < p)
        out = a ^ flips
        if not out.any():
            out = a.copy()  # flip never extinguishes the mask
        return out

    if kind == "dilate":
        out = dilate(m, mag)
    elif kind == "erode":
        out = erode(m, mag)
    elif kind == "translate":
        offset = pspec.offset if pspec.offset is not None else tuple(
            int(v) for v in rng.integers(-mag, mag + 1, size=3))
        out = _translate(m.astype(np.uint8), offset).astype(bool)
    elif kind == "boundary_flip":
        p = (pspec.flip_probability if pspec.flip_probability is not None
             else min(1.0, pspec.magnitude if pspec.magnitude <= 1.0
                      else pspec.magnitude / 10.0))
        out = flip(m, p)
    else:  # hybrid: translate -> dilate -> flip
        offset = pspec.offset if pspec.offset is not None else tuple(
            int(v) for v in rng.integers(-mag, mag + 1, size=3))
        out = _translate(m.astype(np.uint8), offset).astype(bool)
        out = dilate(out, max(0, mag // 2))
        p = (pspec.flip_probability if pspec.flip_probability is not None
             else min(0.5, 0.05 * mag))
        out = flip(out, p)
    return MaskVolume(voxels=out.astype(np.uint8), header=mask.header)
