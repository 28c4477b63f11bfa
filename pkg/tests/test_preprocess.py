import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_mask, make_volume
from radstab.errors import EmptyMask
from radstab.preprocess import (
    binarize_mask,
    connected_components_3d,
    crop_roi,
    preprocess_case,
    resample_mask_nearest,
    resample_trilinear,
    zscore_normalize,
)


# ------------------------------------------------------------------ zscore

def test_zscore_moments(rng):
    vol = make_volume(rng.normal(3.0, 2.5, size=(8, 8, 8)))
    z = zscore_normalize(vol)
    assert abs(z.voxels.mean()) < 1e-12
    assert abs(z.voxels.std() - 1.0) < 1e-12


def test_zscore_constant_returns_zeros_with_warning():
    out = zscore_normalize(make_volume(np.full((4, 4, 4), 7.0)))
    assert np.all(out.voxels == 0.0)
    assert "constant_volume_zscore" in out.warnings


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 100.0),
       st.floats(-50.0, 50.0))
def test_zscore_affine_invariance(seed, scale, shift):
    r = np.random.default_rng(seed)
    arr = r.normal(size=(5, 5, 5))
    a = zscore_normalize(make_volume(arr)).voxels
    b = zscore_normalize(make_volume(arr * scale + shift)).voxels
    np.testing.assert_allclose(a, b, atol=1e-9)


# ---------------------------------------------------------------- binarize

def test_binarize_threshold(rng):
    vol = make_volume(rng.uniform(0, 1, size=(6, 6, 6)))
    mask = binarize_mask(vol, threshold=0.5)
    np.testing.assert_array_equal(mask.voxels, (vol.voxels > 0.5).astype(np.uint8))


# ---------------------------------------------------------------- resample

def test_trilinear_preserves_affine_ramp():
    """Trilinear interpolation is exact on (tri)linear functions away from
    the clamped border."""
    nx, ny, nz = 9, 9, 9
    x, y, z = np.indices((nx, ny, nz), dtype=np.float64)
    vol = make_volume(2.0 * x + 3.0 * y - z + 5.0)
    out = resample_trilinear(vol, (17, 17, 17))
    xs, ys, zs = np.indices((17, 17, 17), dtype=np.float64)
    # cell-centered source coordinates of each target voxel
    sx = np.clip((xs + 0.5) * (9 / 17) - 0.5, 0, 8)
    sy = np.clip((ys + 0.5) * (9 / 17) - 0.5, 0, 8)
    sz = np.clip((zs + 0.5) * (9 / 17) - 0.5, 0, 8)
    expect = 2.0 * sx + 3.0 * sy - sz + 5.0
    np.testing.assert_allclose(out.voxels, expect, atol=1e-9)


def test_trilinear_identity():
    arr = np.random.default_rng(1).normal(size=(7, 7, 7))
    out = resample_trilinear(make_volume(arr), (7, 7, 7))
    np.testing.assert_allclose(out.voxels, arr, atol=1e-12)


def test_nearest_upsample_centered_block():
    mask = np.zeros((3, 3, 3), dtype=np.uint8)
    mask[1, 1, 1] = 1
    out = resample_mask_nearest(make_mask(mask), (6, 6, 6))
    expect = np.zeros((6, 6, 6), dtype=np.uint8)
    expect[2:4, 2:4, 2:4] = 1
    np.testing.assert_array_equal(out.voxels, expect)


def test_resample_updates_spacing():
    vol = make_volume(np.zeros((8, 8, 8)) + np.arange(8)[:, None, None],
                      spacing=(2.0, 2.0, 2.0))
    out = resample_trilinear(vol, (4, 4, 4))
    assert out.header.spacing == (4.0, 4.0, 4.0)


def test_mask_resample_stays_binary(rng):
    mask = make_mask(rng.integers(0, 2, size=(10, 10, 10)))
    out = resample_mask_nearest(mask, (64, 64, 64))
    assert set(np.unique(out.voxels)) <= {0, 1}


# ------------------------------------------------------ connected components

def _brute_components(mask, connectivity):
    """Union-find reference labeling."""
    offs = [(dx, dy, dz)
            for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
            if (dx, dy, dz) != (0, 0, 0)]
    if connectivity == 6:
        offs = [o for o in offs if sum(abs(v) for v in o) == 1]
    elif connectivity == 18:
        offs = [o for o in offs if sum(abs(v) for v in o) <= 2]
    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    fg = [tuple(p) for p in np.argwhere(mask > 0)]
    for p in fg:
        parent[p] = p
    fgset = set(fg)
    for (x, y, z) in fg:
        for dx, dy, dz in offs:
            q = (x + dx, y + dy, z + dz)
            if q in fgset:
                union((x, y, z), q)
    groups = {}
    for p in fg:
        groups.setdefault(find(p), set()).add(p)
    return sorted(sorted(g) for g in groups.values())


@pytest.mark.parametrize("connectivity", [6, 18, 26])
def test_components_match_union_find(rng, connectivity):
    for _ in range(5):
        mask = (rng.random((12, 12, 12)) < 0.25).astype(np.uint8)
        labeling = connected_components_3d(make_mask(mask), connectivity)
        got = {}
        for p in map(tuple, np.argwhere(mask > 0)):
            got.setdefault(labeling.labels[p], set()).add(p)
        got_sets = sorted(sorted(g) for g in got.values())
        assert got_sets == _brute_components(mask, connectivity)


def test_component_sizes(rng):
    mask = np.zeros((10, 10, 10), dtype=np.uint8)
    mask[0:2, 0:2, 0:2] = 1          # size 8
    mask[6:9, 6:9, 6:9] = 1          # size 27
    lab = connected_components_3d(make_mask(mask), 26)
    assert sorted(lab.component_sizes.values()) == [8, 27]


# -------------------------------------------------------------------- crop

def test_crop_margin_clamps():
    mask = np.zeros((20, 20, 20), dtype=np.uint8)
    mask[10:12, 10:12, 10:12] = 1
    vol = make_volume(np.random.default_rng(0).normal(size=(20, 20, 20)))
    _, _, region = crop_roi(vol, make_mask(mask), margin=5)
    assert region.lo == (5, 5, 5)
    assert region.hi == (17, 17, 17)


def test_crop_never_pads_beyond_grid():
    mask = np.zeros((8, 8, 8), dtype=np.uint8)
    mask[0:2, 0:2, 0:2] = 1
    vol = make_volume(np.random.default_rng(0).normal(size=(8, 8, 8)))
    cvol, cmask, region = crop_roi(vol, make_mask(mask), margin=5)
    assert region.lo == (0, 0, 0)
    assert region.hi == (7, 7, 7)
    assert cvol.voxels.shape == (7, 7, 7)


def test_crop_keeps_largest_component_only():
    mask = np.zeros((20, 20, 20), dtype=np.uint8)
    mask[2:4, 2:4, 2:4] = 1            # 8 voxels
    mask[10:14, 10:14, 10:14] = 1      # 64 voxels
    vol = make_volume(np.random.default_rng(0).normal(size=(20, 20, 20)))
    _, cmask, region = crop_roi(vol, make_mask(mask), margin=1)
    assert cmask.voxels.sum() == 64
    assert region.lo == (9, 9, 9)


def test_crop_empty_mask_raises():
    vol = make_volume(np.zeros((4, 4, 4)) + np.arange(4)[None, None, :])
    with pytest.raises(EmptyMask):
        crop_roi(vol, make_mask(np.zeros((4, 4, 4), dtype=np.uint8)))


# ---------------------------------------------------------------- full chain

def test_preprocess_case_chain(rng):
    arr = rng.normal(size=(40, 40, 40))
    mask = np.zeros((40, 40, 40), dtype=np.uint8)
    mask[15:25, 15:25, 15:25] = 1
    cvol, cmask, region = preprocess_case(make_volume(arr), make_mask(mask),
                                          target_dims=(32, 32, 32))
    assert cvol.voxels.shape == cmask.voxels.shape
    assert cmask.voxels.sum() > 0
    assert abs(cvol.voxels.mean()) < 1e-10       # cropped z-score stage
    assert abs(cvol.voxels.std() - 1.0) < 1e-10


def test_preprocess_case_whole_stage(rng):
    arr = rng.normal(size=(20, 20, 20))
    mask = np.zeros((20, 20, 20), dtype=np.uint8)
    mask[8:13, 8:13, 8:13] = 1
    cvol, _, _ = preprocess_case(make_volume(arr), make_mask(mask),
                                 target_dims=(20, 20, 20),
                                 zscore_stage="whole")
    # whole-volume normalization: cropped stats are not exactly 0/1
    assert cvol.voxels.std() > 0


def test_preprocess_case_deterministic(rng):
    arr = rng.normal(size=(30, 30, 30))
    mask = np.zeros((30, 30, 30), dtype=np.uint8)
    mask[10:20, 12:22, 8:18] = 1
    a = preprocess_case(make_volume(arr), make_mask(mask))
    b = preprocess_case(make_volume(arr), make_mask(mask))
    np.testing.assert_array_equal(a[0].voxels, b[0].voxels)
    np.testing.assert_array_equal(a[1].voxels, b[1].voxels)
