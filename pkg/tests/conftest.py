import struct

import numpy as np
import pytest

from radstab.volume_io import MaskVolume, Volume3D, VolumeHeader

DTYPE_CODES = {"u8": (2, 8), "i16": (4, 16), "i32": (8, 32),
               "f32": (16, 32), "f64": (64, 64)}


def build_nifti(values, spacing=(1.0, 1.0, 1.0), datatype="f32",
                slope=1.0, inter=0.0, byte_order="<", magic=b"n+1\x00"):
    """Assemble NIfTI-1 bytes from an (nx, ny, nz) array, x-fastest."""
    arr = np.asarray(values)
    nx, ny, nz = arr.shape
    code, bits = DTYPE_CODES[datatype]
    hdr = bytearray(348)
    struct.pack_into(byte_order + "i", hdr, 0, 348)
    struct.pack_into(byte_order + "8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into(byte_order + "h", hdr, 70, code)
    struct.pack_into(byte_order + "h", hdr, 72, bits)
    struct.pack_into(byte_order + "8f", hdr, 76, 1.0, *spacing, 1.0, 1.0,
                     1.0, 1.0)
    struct.pack_into(byte_order + "f", hdr, 108, 352.0)
    struct.pack_into(byte_order + "f", hdr, 112, slope)
    struct.pack_into(byte_order + "f", hdr, 116, inter)
    hdr[344:348] = magic
    flat = arr.transpose(2, 1, 0).ravel()  # x-fastest payload
    np_dtype = np.dtype({"u8": np.uint8, "i16": np.int16, "i32": np.int32,
                         "f32": np.float32,
                         "f64": np.float64}[datatype]).newbyteorder(byte_order)
    return bytes(hdr) + b"\x00" * 4 + flat.astype(np_dtype).tobytes()


def make_volume(arr, spacing=(1.0, 1.0, 1.0)):
    arr = np.asarray(arr, dtype=np.float64)
    header = VolumeHeader(dims=arr.shape, spacing=spacing, datatype="f64")
    return Volume3D(header=header, voxels=arr)


def make_mask(arr, spacing=(1.0, 1.0, 1.0)):
    arr = np.asarray(arr, dtype=np.uint8)
    header = VolumeHeader(dims=arr.shape, spacing=spacing, datatype="u8")
    return MaskVolume(header=header, voxels=arr)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
