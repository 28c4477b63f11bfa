import numpy as np
import pytest

from radstab.errors import EmptyMask, ErosionExtinction
from radstab.phantom import (
    PerturbationSpec,
    PhantomSpec,
    generate_case,
    generate_cohort,
    perturb_mask,
)
from radstab.seg_metrics import dice
from radstab.volume_io import MaskVolume, VolumeHeader


def _mask(arr, spacing=(1.0, 1.0, 1.0)):
    arr = np.asarray(arr, dtype=np.uint8)
    return MaskVolume(voxels=arr,
                      header=VolumeHeader(dims=arr.shape, spacing=spacing))


SPEC = PhantomSpec(seed=7, n_cases=4, dims=(48, 48, 48))


def test_generate_case_shapes_and_types():
    vol, mask, survival = generate_case(SPEC, 0)
    assert vol.voxels.shape == (48, 48, 48)
    assert mask.voxels.shape == (48, 48, 48)
    assert set(np.unique(mask.voxels)) <= {0, 1}
    assert np.isfinite(vol.voxels).all()
    assert survival > 0
    assert mask.voxels.sum() > 0


def test_generate_case_deterministic_per_index():
    a = generate_case(SPEC, 3)
    b = generate_case(SPEC, 3)
    np.testing.assert_array_equal(a[0].voxels, b[0].voxels)
    np.testing.assert_array_equal(a[1].voxels, b[1].voxels)
    assert a[2] == b[2]
    c = generate_case(SPEC, 4)
    assert not np.array_equal(a[1].voxels, c[1].voxels) or a[2] != c[2]


def test_generate_case_seed_changes_output():
    other = PhantomSpec(seed=8, n_cases=4, dims=(48, 48, 48))
    a = generate_case(SPEC, 0)
    b = generate_case(other, 0)
    assert not np.array_equal(a[0].voxels, b[0].voxels)


def test_ellipsoid_volume_matches_radius():
    """With radius_range pinned to a single value the mask is a ball of
    radius 8; its voxel count should be within 5% of (4/3)*pi*8^3."""
    spec = PhantomSpec(seed=1, n_cases=2, dims=(48, 48, 48),
                       radius_range=(8, 8))
    _, mask, _ = generate_case(spec, 0)
    expected = 4.0 / 3.0 * np.pi * 8 ** 3
    assert abs(mask.voxels.sum() - expected) / expected < 0.05


def test_tumor_brighter_than_background():
    vol, mask, _ = generate_case(SPEC, 1)
    inside = vol.voxels[mask.voxels > 0].mean()
    outside = vol.voxels[mask.voxels == 0].mean()
    assert inside > outside + 0.3


def test_cohort_balance_with_signal():
    spec = PhantomSpec(seed=11, n_cases=40, dims=(32, 32, 32),
                       radius_range=(5, 9),
                       signal_volume_weight=10.0,
                       signal_intensity_weight=5.0)
    cases = generate_cohort(spec)
    assert len(cases) == 40
    balance = np.mean([s > 4.0 for _, _, s in cases])
    assert 0.3 <= balance <= 0.7


def test_cohort_balance_without_signal():
    spec = PhantomSpec(seed=2, n_cases=60, dims=(32, 32, 32),
                       radius_range=(5, 9),
                       signal_volume_weight=0.0,
                       signal_intensity_weight=0.0)
    cases = generate_cohort(spec)
    balance = np.mean([s > 4.0 for _, _, s in cases])
    assert 0.3 <= balance <= 0.7


# ------------------------------------------------------------ perturbations

def test_dilate_single_voxel_gives_cube():
    m = np.zeros((7, 7, 7), dtype=np.uint8)
    m[3, 3, 3] = 1
    out = perturb_mask(_mask(m), PerturbationSpec("dilate", magnitude=1))
    assert out.voxels.sum() == 27
    assert out.voxels[2:5, 2:5, 2:5].sum() == 27


def test_erode_inverts_dilate_on_cube():
    m = np.zeros((11, 11, 11), dtype=np.uint8)
    m[3:8, 3:8, 3:8] = 1
    dil = perturb_mask(_mask(m), PerturbationSpec("dilate", magnitude=1))
    back = perturb_mask(dil, PerturbationSpec("erode", magnitude=1))
    np.testing.assert_array_equal(back.voxels, m)


def test_erosion_extinction():
    m = np.zeros((9, 9, 9), dtype=np.uint8)
    m[3:6, 3:6, 3:6] = 1  # a 3x3x3 block dies under radius-2 erosion
    with pytest.raises(ErosionExtinction):
        perturb_mask(_mask(m), PerturbationSpec("erode", magnitude=2))


def test_perturb_empty_mask_raises():
    with pytest.raises(EmptyMask):
        perturb_mask(_mask(np.zeros((5, 5, 5))),
                     PerturbationSpec("dilate", magnitude=1))


@pytest.mark.parametrize("kind", ["dilate", "erode", "translate",
                                  "boundary_flip", "hybrid"])
def test_magnitude_zero_is_identity(kind):
    _, mask, _ = generate_case(SPEC, 0)
    out = perturb_mask(mask, PerturbationSpec(kind, magnitude=0, seed=3))
    np.testing.assert_array_equal(out.voxels, mask.voxels)


def test_translate_preserves_volume():
    _, mask, _ = generate_case(SPEC, 0)
    out = perturb_mask(mask, PerturbationSpec("translate", magnitude=3,
                                              seed=1))
    assert out.voxels.sum() == mask.voxels.sum()


def test_translate_clamped_at_border():
    m = np.zeros((6, 6, 6), dtype=np.uint8)
    m[4:6, 4:6, 4:6] = 1
    out = perturb_mask(_mask(m),
                       PerturbationSpec("translate", magnitude=5,
                                        offset=(5, 5, 5)))
    # already flush against the corner: the clamp keeps it in place
    np.testing.assert_array_equal(out.voxels, m)
    assert out.voxels.sum() == m.sum()


def test_boundary_flip_never_extinguishes():
    m = np.zeros((7, 7, 7), dtype=np.uint8)
    m[3, 3, 3] = 1
    for seed in range(25):
        out = perturb_mask(_mask(m),
                           PerturbationSpec("boundary_flip", magnitude=1,
                                            seed=seed,
                                            flip_probability=1.0))
        assert out.voxels.sum() > 0, seed


def test_boundary_flip_changes_surface_only():
    m = np.zeros((13, 13, 13), dtype=np.uint8)
    m[3:10, 3:10, 3:10] = 1
    out = perturb_mask(_mask(m),
                       PerturbationSpec("boundary_flip", magnitude=1,
                                        seed=4, flip_probability=0.5))
    # the deep interior is untouched
    np.testing.assert_array_equal(out.voxels[5:8, 5:8, 5:8],
                                  m[5:8, 5:8, 5:8])
    assert not np.array_equal(out.voxels, m)


def test_perturbation_deterministic():
    _, mask, _ = generate_case(SPEC, 2)
    spec = PerturbationSpec("hybrid", magnitude=3, seed=9)
    a = perturb_mask(mask, spec)
    b = perturb_mask(mask, spec)
    np.testing.assert_array_equal(a.voxels, b.voxels)


def test_dice_decreases_with_dilation_magnitude():
    """Averaged over a small cohort, dice against the clean mask strictly
    decreases as the dilation radius grows."""
    spec = PhantomSpec(seed=5, n_cases=10, dims=(48, 48, 48),
                       radius_range=(7, 11))
    masks = [generate_case(spec, i)[1] for i in range(10)]
    means = []
    for r in range(0, 5):
        scores = [dice(m, perturb_mask(m, PerturbationSpec("dilate",
                                                           magnitude=r,
                                                           seed=0)))
                  for m in masks]
        means.append(float(np.mean(scores)))
    assert means[0] == 1.0
    assert all(a > b for a, b in zip(means, means[1:]))


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        PerturbationSpec("shear", magnitude=1)


def test_bad_spec_rejected():
    with pytest.raises(ValueError):
        PhantomSpec(seed=0, n_cases=0)
    with pytest.raises(ValueError):
        PhantomSpec(seed=0, n_cases=5, radius_range=(9, 5))
