"""Volume and manifest I/O.

Two on-disk volume formats are supported:

* NIfTI-1 (``.nii`` / ``.nii.gz``), read-only, little- or big-endian.
* An internal raw format: ``<name>.vol`` holding the little-endian voxel
  payload in x-fastest order, next to a ``<name>.json`` sidecar with
  ``dims``, ``spacing``, ``datatype`` and ``kind``.

Voxel arrays are kept as numpy arrays of shape ``(nx, ny, nz)`` indexed
``[x, y, z]``; flat payloads are x-fastest.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    DuplicateCaseId,
    HeaderTooShort,
    LabeledWithoutSurvival,
    MaskNotBinary,
    MissingFile,
    NonFinitePayload,
    PayloadSizeMismatch,
    SidecarMissingKey,
    UnsupportedDatatype,
)

DATATYPES = {"u8": np.uint8, "i16": np.int16, "i32": np.int32,
             "f32": np.float32, "f64": np.float64}

_NIFTI_DTYPE_CODES = {2: "u8", 4: "i16", 8: "i32", 16: "f32", 64: "f64"}


@dataclass
class VolumeHeader:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    datatype: str = "f64"
    intensity_scale: float = 1.0
    intensity_offset: float = 0.0
    endianness: str = "little"

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        if any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be >= 1, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be > 0, got {self.spacing}")
        if self.datatype not in DATATYPES:
            raise UnsupportedDatatype(self.datatype)
        if self.intensity_scale == 0.0:
            self.intensity_scale = 1.0
            self.intensity_offset = 0.0

    @property
    def voxel_count(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]


@dataclass
class Volume3D:
    header: VolumeHeader
    voxels: np.ndarray  # float64, shape = dims
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.voxels = np.asarray(self.voxels, dtype=np.float64)
        if self.voxels.shape != self.header.dims:
            raise DimMismatch(
                f"voxels shape {self.voxels.shape} != dims {self.header.dims}")
        if not np.all(np.isfinite(self.voxels)):
            raise NonFinitePayload("volume contains non-finite values")


@dataclass
class MaskVolume:
    header: VolumeHeader
    voxels: np.ndarray  # uint8 in {0,1}, shape = dims

    def __post_init__(self):
        self.voxels = np.asarray(self.voxels, dtype=np.uint8)
        if self.voxels.shape != self.header.dims:
            raise DimMismatch(
                f"mask shape {self.voxels.shape} != dims {self.header.dims}")
        if self.voxels.max(initial=0) > 1:
            raise MaskNotBinary("mask values outside {0,1}")

    @property
    def foreground_count(self) -> int:
        return int(self.voxels.sum())


@dataclass
class CaseManifest:
    case_id: str
    image_path: str
    gt_mask_path: str
    model_masks: dict[str, str]
    survival_years: float | None
    dataset_tag: str
    labeled: bool


def _flat_to_grid(flat: np.ndarray, dims: tuple[int, int, int]) -> np.ndarray:
    """x-fastest flat payload -> (nx, ny, nz) array."""
    nx, ny, nz = dims
    return flat.reshape((nz, ny, nx)).transpose(2, 1, 0)


def _grid_to_flat(grid: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(grid.transpose(2, 1, 0)).ravel()


def parse_nifti1(data: bytes) -> Volume3D:
    """Decode a (possibly gzipped) NIfTI-1 byte stream.

    Byte order is auto-detected from the ``sizeof_hdr`` field; intensities
    are rescaled as ``stored * scl_slope + scl_inter`` (slope 0 -> 1/0).
    Only the first three dims are used; qform/sform are ignored.
    """
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    if len(data) < 348:
        raise HeaderTooShort(f"{len(data)} bytes < 348")

    if struct.unpack_from("<i", data, 0)[0] == 348:
        bo = "<"
        endianness = "little"
    elif struct.unpack_from(">i", data, 0)[0] == 348:
        bo = ">"
        endianness = "big"
    else:
        raise HeaderTooShort("sizeof_hdr is not 348 under either byte order")

    magic = data[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise BadMagic(repr(magic))

    dim = struct.unpack_from(bo + "8h", data, 40)
    datatype_code = struct.unpack_from(bo + "h", data, 70)[0]
    pixdim = struct.unpack_from(bo + "8f", data, 76)
    vox_offset = struct.unpack_from(bo + "f", data, 108)[0]
    scl_slope = struct.unpack_from(bo + "f", data, 112)[0]
    scl_inter = struct.unpack_from(bo + "f", data, 116)[0]

    if datatype_code not in _NIFTI_DTYPE_CODES:
        raise UnsupportedDatatype(f"datatype code {datatype_code}")
    datatype = _NIFTI_DTYPE_CODES[datatype_code]

    dims = tuple(max(1, int(d)) for d in dim[1:4])
    spacing = tuple(abs(float(p)) or 1.0 for p in pixdim[1:4])

    header = VolumeHeader(dims=dims, spacing=spacing, datatype=datatype,
                          intensity_scale=float(scl_slope),
                          intensity_offset=float(scl_inter),
                          endianness=endianness)

    offset = int(vox_offset) if vox_offset >= 348 else 348
    np_dtype = np.dtype(DATATYPES[datatype]).newbyteorder(bo)
    n = header.voxel_count
    payload = data[offset:offset + n * np_dtype.itemsize]
    if len(payload) < n * np_dtype.itemsize:
        raise DimMismatch(
            f"payload holds {len(payload)} bytes, dims imply "
            f"{n * np_dtype.itemsize}")
    stored = np.frombuffer(payload, dtype=np_dtype, count=n).astype(np.float64)
    values = stored * header.intensity_scale + header.intensity_offset
    if not np.all(np.isfinite(values)):
        raise NonFinitePayload("NIfTI payload contains non-finite values")
    return Volume3D(header=header, voxels=_flat_to_grid(values, dims))


def read_raw(volume_path, sidecar_path=None) -> Volume3D | MaskVolume:
    """Read the internal ``.vol`` + JSON sidecar format."""
    volume_path = Path(volume_path)
    if sidecar_path is None:
        sidecar_path = volume_path.with_suffix(".json")
    with open(sidecar_path) as f:
        sidecar = json.load(f)
    for key in ("dims", "spacing", "datatype", "kind"):
        if key not in sidecar:
            raise SidecarMissingKey(key)

    dims = tuple(int(d) for d in sidecar["dims"])
    dtype = np.dtype(DATATYPES[sidecar["datatype"]]).newbyteorder("<")
    raw = np.fromfile(volume_path, dtype=dtype)
    n = dims[0] * dims[1] * dims[2]
    if raw.size != n:
        raise PayloadSizeMismatch(f"payload {raw.size} voxels, dims imply {n}")

    header = VolumeHeader(dims=dims, spacing=tuple(sidecar["spacing"]),
                          datatype=sidecar["datatype"])
    grid = _flat_to_grid(raw.astype(np.float64), dims)
    if sidecar["kind"] == "mask":
        if np.any(grid < -1e-6) or np.any(grid > 1 + 1e-6):
            raise MaskNotBinary("mask payload outside [0, 1]")
        return MaskVolume(header=header, voxels=(grid > 0.5).astype(np.uint8))
    if not np.all(np.isfinite(grid)):
        raise NonFinitePayload(str(volume_path))
    return Volume3D(header=header, voxels=grid)


def write_raw(vol: Volume3D | MaskVolume, volume_path, sidecar_path=None) -> None:
    """Write a volume/mask in the internal format (payload always raw LE)."""
    volume_path = Path(volume_path)
    if sidecar_path is None:
        sidecar_path = volume_path.with_suffix(".json")
    kind = "mask" if isinstance(vol, MaskVolume) else "image"
    datatype = "u8" if kind == "mask" else vol.header.datatype
    if datatype not in ("f32", "f64", "u8", "i16", "i32"):
        datatype = "f64"
    dtype = np.dtype(DATATYPES[datatype]).newbyteorder("<")
    _grid_to_flat(vol.voxels).astype(dtype).tofile(volume_path)
    sidecar = {"dims": list(vol.header.dims),
               "spacing": list(vol.header.spacing),
               "datatype": datatype, "kind": kind}
    with open(sidecar_path, "w") as f:
        json.dump(sidecar, f, indent=1, sort_keys=True)


def load_manifest(path) -> list[CaseManifest]:
    """Load and validate a JSON case manifest.

    Relative paths are resolved against the manifest's directory; every
    referenced file must exist.
    """
    path = Path(path)
    base = path.parent
    with open(path) as f:
        records = json.load(f)

    def resolve(p: str) -> str:
        q = Path(p)
        if not q.is_absolute():
            q = base / q
        if not q.exists():
            raise MissingFile(str(q))
        return str(q)

    cases: list[CaseManifest] = []
    seen: set[str] = set()
    for rec in records:
        cid = rec["case_id"]
        if cid in seen:
            raise DuplicateCaseId(cid)
        seen.add(cid)
        labeled = bool(rec.get("labeled", rec.get("survival_years") is not None))
        survival = rec.get("survival_years")
        if labeled and survival is None:
            raise LabeledWithoutSurvival(cid)
        cases.append(CaseManifest(
            case_id=cid,
            image_path=resolve(rec["image_path"]),
            gt_mask_path=resolve(rec["gt_mask_path"]),
            model_masks={m: resolve(p)
                         for m, p in rec.get("model_masks", {}).items()},
            survival_years=None if survival is None else float(survival),
            dataset_tag=rec.get("dataset_tag", "default"),
            labeled=labeled,
        ))
    return cases


def load_volume_any(path) -> Volume3D | MaskVolume:
    """Dispatch on extension: .nii/.nii.gz -> NIfTI, .vol -> internal raw."""
    path = Path(path)
    name = path.name.lower()
    if name.endswith(".nii") or name.endswith(".nii.gz"):
        return parse_nifti1(path.read_bytes())
    return read_raw(path)
