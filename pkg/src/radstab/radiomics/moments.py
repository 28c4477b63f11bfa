"""Intensity-weighted geometric moment invariants.

Central moments up to order 3 of the masked intensity function (ROI
intensities shifted to be nonnegative), scale-normalized as
eta_pqr = mu_pqr / mu_000^(1 + (p+q+r)/3).

j1..j3 are the classic second-order rotation invariants. t1 (third-order
tensor norm) and t2 (contraction vector norm) are also rotation
invariants; t3..t7 are symmetric under axis permutation and reflection.
All ten are translation invariant.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyMask
from ..volume_io import MaskVolume, Volume3D

FEATURE_NAMES = ("j1", "j2", "j3", "t1", "t2", "t3", "t4", "t5", "t6", "t7")


def _central_eta(vol: Volume3D, mask: MaskVolume):
    roi = mask.voxels.astype(bool)
    if not roi.any():
        raise EmptyMask("moment_invariants requires a nonempty mask")
    coords = np.argwhere(roi).astype(np.float64)
    w = vol.voxels[roi].astype(np.float64)
    w = w - w.min()  # nonnegative mass, invariant to intensity shifts
    m000 = w.sum()
    if m000 == 0:
        return None
    centroid = (coords * w[:, None]).sum(axis=0) / m000
    d = coords - centroid

    eta = {}
    for p in range(4):
        for q in range(4 - p):
            for r in range(4 - p - q):
                order = p + q + r
                if order < 2 or order > 3:
                    continue
                mu = float((w * d[:, 0] ** p * d[:, 1] ** q
                            * d[:, 2] ** r).sum())
                eta[(p, q, r)] = mu / m000 ** (1.0 + order / 3.0)
    return eta


def moment_invariants(vol: Volume3D, mask: MaskVolume):
    """Return (features dict keyed mom_*, flags list)."""
    eta = _central_eta(vol, mask)
    if eta is None:
        return ({f"mom_{k}": 0.0 for k in FEATURE_NAMES},
                ["degenerate_moment_mass"])
    e = eta
    j1 = e[2, 0, 0] + e[0, 2, 0] + e[0, 0, 2]
    j2 = (e[2, 0, 0] * e[0, 2, 0] + e[2, 0, 0] * e[0, 0, 2]
          + e[0, 2, 0] * e[0, 0, 2]
          - e[1, 1, 0] ** 2 - e[1, 0, 1] ** 2 - e[0, 1, 1] ** 2)
    second = np.array([[e[2, 0, 0], e[1, 1, 0], e[1, 0, 1]],
                       [e[1, 1, 0], e[0, 2, 0], e[0, 1, 1]],
                       [e[1, 0, 1], e[0, 1, 1], e[0, 0, 2]]])
    j3 = float(np.linalg.det(second))

    # third-order tensor norm with multinomial weights
    t1 = (e[3, 0, 0] ** 2 + e[0, 3, 0] ** 2 + e[0, 0, 3] ** 2
          + 3 * (e[2, 1, 0] ** 2 + e[2, 0, 1] ** 2 + e[1, 2, 0] ** 2
                 + e[0, 2, 1] ** 2 + e[1, 0, 2] ** 2 + e[0, 1, 2] ** 2)
          + 6 * e[1, 1, 1] ** 2)
    vx = e[3, 0, 0] + e[1, 2, 0] + e[1, 0, 2]
    vy = e[0, 3, 0] + e[2, 1, 0] + e[0, 1, 2]
    vz = e[0, 0, 3] + e[2, 0, 1] + e[0, 2, 1]
    t2 = vx ** 2 + vy ** 2 + vz ** 2
    t3 = e[3, 0, 0] ** 2 + e[0, 3, 0] ** 2 + e[0, 0, 3] ** 2
    t4 = (e[2, 1, 0] ** 2 + e[2, 0, 1] ** 2 + e[1, 2, 0] ** 2
          + e[0, 2, 1] ** 2 + e[1, 0, 2] ** 2 + e[0, 1, 2] ** 2)
    t5 = e[1, 1, 1] ** 2
    t6 = (e[3, 0, 0] * (e[1, 2, 0] + e[1, 0, 2])
          + e[0, 3, 0] * (e[2, 1, 0] + e[0, 1, 2])
          + e[0, 0, 3] * (e[2, 0, 1] + e[0, 2, 1]))
    t7 = (e[3, 0, 0] ** 2 * e[0, 3, 0] ** 2
          + e[0, 3, 0] ** 2 * e[0, 0, 3] ** 2
          + e[0, 0, 3] ** 2 * e[3, 0, 0] ** 2)

    vals = (j1, j2, j3, t1, t2, t3, t4, t5, t6, t7)
    return {f"mom_{k}": float(v) for k, v in zip(FEATURE_NAMES, vals)}, []
