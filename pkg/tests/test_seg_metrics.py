import numpy as np
import pytest
from scipy import ndimage

from conftest import make_mask
from radstab.errors import DimMismatch, EmptyMask
from radstab.seg_metrics import (
    dice,
    evaluate_batch,
    hausdorff,
    iou,
    score_pair,
    surface_voxels,
)


def _cube(lo, size, grid=20):
    m = np.zeros((grid, grid, grid), dtype=np.uint8)
    m[lo[0]:lo[0] + size, lo[1]:lo[1] + size, lo[2]:lo[2] + size] = 1
    return make_mask(m)


def test_identical_masks():
    a = _cube((5, 5, 5), 6)
    assert dice(a, a) == 1.0
    assert iou(a, a) == 1.0
    assert hausdorff(a, a) == 0.0


def test_shifted_cube_fixture():
    """10x10x10 cubes overlapping in half the volume: dice 0.5, iou 1/3."""
    a = _cube((0, 0, 0), 10)
    b = _cube((5, 0, 0), 10)
    assert dice(a, b) == pytest.approx(0.5, abs=1e-15)
    assert iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_point_pair_hausdorff():
    a = np.zeros((10, 10, 10), dtype=np.uint8)
    b = np.zeros((10, 10, 10), dtype=np.uint8)
    a[1, 1, 1] = 1
    b[4, 5, 1] = 1  # distance sqrt(9+16) = 5
    assert hausdorff(make_mask(a), make_mask(b)) == pytest.approx(5.0)


def test_both_empty_convention():
    a = make_mask(np.zeros((5, 5, 5), dtype=np.uint8))
    assert dice(a, a) == 1.0
    assert iou(a, a) == 1.0


def test_one_empty():
    a = make_mask(np.zeros((5, 5, 5), dtype=np.uint8))
    b = _cube((1, 1, 1), 2, grid=5)
    assert dice(a, b) == 0.0
    assert iou(a, b) == 0.0
    with pytest.raises(EmptyMask):
        hausdorff(a, b)


def test_dim_mismatch():
    with pytest.raises(DimMismatch):
        dice(_cube((0, 0, 0), 3, grid=8), _cube((0, 0, 0), 3, grid=9))


def test_dice_iou_identity(rng):
    """dice = 2*iou/(1+iou) on 1000 random pairs within 1e-12."""
    for _ in range(1000):
        a = make_mask((rng.random((6, 6, 6)) < 0.4).astype(np.uint8))
        b = make_mask((rng.random((6, 6, 6)) < 0.4).astype(np.uint8))
        d, j = dice(a, b), iou(a, b)
        assert abs(d - 2 * j / (1 + j)) < 1e-12


def test_symmetry(rng):
    for _ in range(20):
        a = make_mask((rng.random((8, 8, 8)) < 0.3).astype(np.uint8))
        b = make_mask((rng.random((8, 8, 8)) < 0.3).astype(np.uint8))
        assert dice(a, b) == dice(b, a)
        assert iou(a, b) == iou(b, a)
        if a.voxels.any() and b.voxels.any():
            assert hausdorff(a, b) == hausdorff(b, a)


def test_translation_equivariance():
    a = _cube((3, 3, 3), 5)
    b = _cube((4, 3, 3), 5)
    a2 = _cube((8, 8, 8), 5)
    b2 = _cube((9, 8, 8), 5)
    assert dice(a, b) == dice(a2, b2)
    assert hausdorff(a, b) == hausdorff(a2, b2)


def test_erosion_monotone_dice():
    base = _cube((4, 4, 4), 10)
    prev = 1.0
    struct = ndimage.generate_binary_structure(3, 3)
    m = base.voxels.astype(bool)
    for _ in range(3):
        m = ndimage.binary_erosion(m, structure=struct, border_value=0)
        d = dice(base, make_mask(m.astype(np.uint8)))
        assert d < prev
        prev = d


def test_surface_voxels_cube():
    cube = _cube((2, 2, 2), 4, grid=8)
    surf = surface_voxels(cube)
    assert len(surf) == 4 ** 3 - 2 ** 3   # interior 2^3 removed


def test_surface_border_touching():
    m = np.ones((3, 3, 3), dtype=np.uint8)
    surf = surface_voxels(make_mask(m))
    assert len(surf) == 26  # everything except the center voxel


def test_hd95_leq_hd100(rng):
    for _ in range(10):
        a = make_mask((rng.random((8, 8, 8)) < 0.3).astype(np.uint8))
        b = make_mask((rng.random((8, 8, 8)) < 0.3).astype(np.uint8))
        if not (a.voxels.any() and b.voxels.any()):
            continue
        assert hausdorff(a, b, 95.0) <= hausdorff(a, b, 100.0) + 1e-12


def test_spacing_scales_distances():
    a = np.zeros((10, 4, 4), dtype=np.uint8)
    b = np.zeros((10, 4, 4), dtype=np.uint8)
    a[1, 1, 1] = 1
    b[5, 1, 1] = 1
    assert hausdorff(make_mask(a), make_mask(b),
                     spacing=(2.0, 1.0, 1.0)) == pytest.approx(8.0)


def test_evaluate_batch_isolation():
    good = (_cube((2, 2, 2), 4), _cube((3, 2, 2), 4))
    empty = make_mask(np.zeros((20, 20, 20), dtype=np.uint8))
    summary = evaluate_batch([("ok", *good), ("bad", good[0], empty)])
    assert summary.n_cases == 1
    errs = [r for r in summary.per_case if "error" in r]
    assert len(errs) == 1 and errs[0]["case_id"] == "bad"


def test_score_pair_fields():
    s = score_pair(_cube((2, 2, 2), 5), _cube((3, 2, 2), 5))
    assert 0 <= s.dice <= 1 and 0 <= s.iou <= 1
    assert s.hd95 <= s.hausdorff + 1e-12
