import gzip
import json

import numpy as np
import pytest

from conftest import build_nifti, make_mask, make_volume
from radstab.errors import (
    BadMagic,
    DimMismatch,
    DuplicateCaseId,
    HeaderTooShort,
    LabeledWithoutSurvival,
    MissingFile,
    NonFinitePayload,
    SidecarMissingKey,
    UnsupportedDatatype,
)
from radstab.volume_io import (
    load_manifest,
    load_volume_any,
    parse_nifti1,
    read_raw,
    write_raw,
)


def test_little_endian_roundtrip(rng):
    arr = rng.normal(size=(4, 3, 2)).astype(np.float32).astype(np.float64)
    vol = parse_nifti1(build_nifti(arr, spacing=(0.5, 1.0, 2.0)))
    assert vol.header.dims == (4, 3, 2)
    assert vol.header.spacing == (0.5, 1.0, 2.0)
    assert vol.header.endianness == "little"
    np.testing.assert_array_equal(vol.voxels, arr)


def test_byte_swapped_twin_decodes_identically(rng):
    arr = rng.normal(size=(5, 4, 3)).astype(np.float32).astype(np.float64)
    le = parse_nifti1(build_nifti(arr, byte_order="<"))
    be = parse_nifti1(build_nifti(arr, byte_order=">"))
    assert be.header.endianness == "big"
    np.testing.assert_array_equal(le.voxels, be.voxels)
    assert le.header.dims == be.header.dims
    assert le.header.spacing == be.header.spacing


def test_gzipped_stream(rng):
    arr = rng.normal(size=(3, 3, 3)).astype(np.float32).astype(np.float64)
    raw = build_nifti(arr)
    vol = parse_nifti1(gzip.compress(raw))
    np.testing.assert_array_equal(vol.voxels, arr)


def test_bad_magic():
    raw = bytearray(build_nifti(np.zeros((2, 2, 2))))
    raw[344:348] = b"XXXX"
    with pytest.raises(BadMagic):
        parse_nifti1(bytes(raw))


def test_truncated_header():
    with pytest.raises(HeaderTooShort):
        parse_nifti1(b"\x00" * 200)


def test_garbage_sizeof_hdr():
    raw = bytearray(build_nifti(np.zeros((2, 2, 2))))
    raw[0:4] = b"\xff\xff\xff\xff"
    with pytest.raises(HeaderTooShort):
        parse_nifti1(bytes(raw))


def test_unsupported_datatype():
    raw = bytearray(build_nifti(np.zeros((2, 2, 2))))
    import struct
    struct.pack_into("<h", raw, 70, 128)  # RGB, unsupported
    with pytest.raises(UnsupportedDatatype):
        parse_nifti1(bytes(raw))


def test_short_payload():
    raw = build_nifti(np.zeros((4, 4, 4)))
    with pytest.raises(DimMismatch):
        parse_nifti1(raw[:-40])


def test_nonfinite_payload():
    arr = np.zeros((2, 2, 2), dtype=np.float64)
    arr[0, 0, 0] = np.inf
    with pytest.raises(NonFinitePayload):
        parse_nifti1(build_nifti(arr))


def test_slope_intercept_oracle(rng):
    """value = stored * slope + inter for 1000 random triples."""
    stored = rng.integers(-100, 100, size=1000).astype(np.int16)
    slopes = rng.uniform(-3, 3, size=10)
    inters = rng.uniform(-50, 50, size=10)
    for slope, inter in zip(slopes, inters):
        arr = stored.reshape(10, 10, 10)
        vol = parse_nifti1(build_nifti(arr, datatype="i16",
                                       slope=float(np.float32(slope)),
                                       inter=float(np.float32(inter))))
        expect = arr.astype(np.float64) * np.float32(slope) \
            + np.float32(inter)
        np.testing.assert_allclose(vol.voxels, expect, rtol=0, atol=0)


def test_slope_zero_means_identity():
    arr = np.arange(8, dtype=np.float64).reshape(2, 2, 2)
    vol = parse_nifti1(build_nifti(arr, slope=0.0, inter=7.0))
    np.testing.assert_array_equal(vol.voxels, arr)


def test_x_fastest_order():
    arr = np.zeros((3, 2, 2))
    arr[1, 0, 0] = 5.0  # second voxel in x-fastest order
    raw = build_nifti(arr)
    flat = np.frombuffer(raw[352:], dtype="<f4")
    assert flat[1] == 5.0
    vol = parse_nifti1(raw)
    assert vol.voxels[1, 0, 0] == 5.0


@pytest.mark.parametrize("datatype", ["f32", "f64"])
def test_raw_roundtrip_bit_exact(tmp_path, rng, datatype):
    arr = rng.normal(size=(5, 6, 7))
    if datatype == "f32":
        arr = arr.astype(np.float32).astype(np.float64)
    vol = make_volume(arr)
    vol.header.datatype = datatype
    path = tmp_path / "case.vol"
    write_raw(vol, path)
    back = read_raw(path)
    np.testing.assert_array_equal(back.voxels, arr)
    assert back.header.dims == vol.header.dims


def test_raw_mask_roundtrip(tmp_path, rng):
    mask = make_mask(rng.integers(0, 2, size=(4, 4, 4)))
    path = tmp_path / "m.vol"
    write_raw(mask, path)
    back = read_raw(path)
    np.testing.assert_array_equal(back.voxels, mask.voxels)
    assert back.voxels.dtype == np.uint8


def test_sidecar_missing_key(tmp_path):
    vol = make_volume(np.zeros((2, 2, 2)))
    path = tmp_path / "x.vol"
    write_raw(vol, path)
    sidecar = tmp_path / "x.json"
    data = json.loads(sidecar.read_text())
    del data["dims"]
    sidecar.write_text(json.dumps(data))
    with pytest.raises(SidecarMissingKey):
        read_raw(path)


def _write_case(tmp_path, name):
    write_raw(make_volume(np.ones((3, 3, 3))), tmp_path / f"{name}_img.vol")
    m = np.zeros((3, 3, 3), dtype=np.uint8)
    m[1, 1, 1] = 1
    write_raw(make_mask(m), tmp_path / f"{name}_gt.vol")


def _manifest_record(name, **over):
    rec = {"case_id": name, "image_path": f"{name}_img.vol",
           "gt_mask_path": f"{name}_gt.vol", "model_masks": {},
           "survival_years": 5.0, "dataset_tag": "d", "labeled": True}
    rec.update(over)
    return rec


def test_manifest_roundtrip(tmp_path):
    _write_case(tmp_path, "a")
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps([_manifest_record("a")]))
    cases = load_manifest(path)
    assert len(cases) == 1 and cases[0].case_id == "a"
    assert cases[0].survival_years == 5.0


def test_manifest_duplicate_id(tmp_path):
    _write_case(tmp_path, "a")
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps([_manifest_record("a"),
                                _manifest_record("a")]))
    with pytest.raises(DuplicateCaseId):
        load_manifest(path)


def test_manifest_missing_file(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps([_manifest_record("a")]))
    with pytest.raises(MissingFile):
        load_manifest(path)


def test_manifest_labeled_without_survival(tmp_path):
    _write_case(tmp_path, "a")
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(
        [_manifest_record("a", survival_years=None, labeled=True)]))
    with pytest.raises(LabeledWithoutSurvival):
        load_manifest(path)


def test_load_volume_any_dispatch(tmp_path, rng):
    arr = rng.normal(size=(3, 3, 3)).astype(np.float32).astype(np.float64)
    nii = tmp_path / "v.nii"
    nii.write_bytes(build_nifti(arr))
    np.testing.assert_array_equal(load_volume_any(nii).voxels, arr)
    gz = tmp_path / "v.nii.gz"
    gz.write_bytes(gzip.compress(build_nifti(arr)))
    np.testing.assert_array_equal(load_volume_any(gz).voxels, arr)
