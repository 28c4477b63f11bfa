"""Whole-registry extraction and the FeatureMatrix container."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import EmptyMask
from ..volume_io import MaskVolume, Volume3D
from .discretize import DiscretizationConfig, discretize
from .firstorder import firstorder_features
from .glcm import glcm_family
from .glrlm import glrlm_family
from .moments import moment_invariants
from .ngldm import ngldm_family
from .ngtdm import ngtdm_family
from .registry import default_registry
from .shape import shape_features
from .zones import gldzm_family, glszm_family


@dataclass
class FeatureVector:
    case_id: str
    values: dict[str, float]
    nan_policy_applied: bool = False
    flags: list[str] = field(default_factory=list)


@dataclass
class FeatureMatrix:
    case_ids: list[str]
    feature_ids: list[str]
    values: np.ndarray  # (n_cases, n_features)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.case_ids), len(self.feature_ids)):
            raise ValueError("FeatureMatrix shape mismatch")

    @classmethod
    def from_vectors(cls, vectors: list[FeatureVector]) -> "FeatureMatrix":
        if not vectors:
            raise ValueError("no feature vectors")
        feature_ids = list(vectors[0].values)
        rows = [[v.values[f] for f in feature_ids] for v in vectors]
        return cls(case_ids=[v.case_id for v in vectors],
                   feature_ids=feature_ids, values=np.array(rows))

    def column(self, feature_id: str) -> np.ndarray:
        return self.values[:, self.feature_ids.index(feature_id)]

    def subset_cases(self, case_ids: list[str]) -> "FeatureMatrix":
        index = {c: i for i, c in enumerate(self.case_ids)}
        rows = [index[c] for c in case_ids]
        return FeatureMatrix(case_ids=list(case_ids),
                             feature_ids=list(self.feature_ids),
                             values=self.values[rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["case_id"] + self.feature_ids)
            for cid, row in zip(self.case_ids, self.values):
                w.writerow([cid] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        with open(path, newline="") as f:
            r = csv.reader(f)
            header = next(r)
            case_ids, rows = [], []
            for line in r:
                case_ids.append(line[0])
                rows.append([float(v) for v in line[1:]])
        return cls(case_ids=case_ids, feature_ids=header[1:],
                   values=np.array(rows))


def extract_all(vol: Volume3D, mask: MaskVolume,
                cfg: DiscretizationConfig | None = None) -> FeatureVector:
    """Extract every registry feature for one cropped image/mask pair.

    Deterministic ordering (registry order); any non-finite value is
    replaced by 0 and flagged, so downstream matrices are always finite.
    """
    if cfg is None:
        cfg = DiscretizationConfig()
    if mask.foreground_count == 0:
        raise EmptyMask("extract_all requires a nonempty mask")
    registry = default_registry()
    values: dict[str, float] = {}
    flags: list[str] = []

    fo, fo_flags = firstorder_features(vol, mask, cfg)
    values.update(fo)
    flags += fo_flags
    sh, sh_flags = shape_features(mask)
    values.update(sh)
    flags += sh_flags

    disc = discretize(vol, mask, cfg)
    lv, ng = disc.levels, disc.ng
    values.update(glcm_family(lv, ng))
    values.update(glrlm_family(lv, ng))
    values.update(glszm_family(lv, ng))
    values.update(gldzm_family(lv, ng))
    values.update(ngtdm_family(lv, ng))
    values.update(ngldm_family(lv, ng))

    mom, mom_flags = moment_invariants(vol, mask)
    values.update(mom)
    flags += mom_flags

    nan_applied = False
    ordered: dict[str, float] = {}
    for fid in registry.feature_ids:
        v = values[fid]
        if not np.isfinite(v):
            v = 0.0
            nan_applied = True
            flags.append(f"nonfinite_{fid}")
        ordered[fid] = float(v)
    return FeatureVector(case_id="", values=ordered,
                         nan_policy_applied=nan_applied, flags=flags)


@dataclass
class MinMaxScaling:
    feature_ids: list[str]
    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, m: FeatureMatrix) -> FeatureMatrix:
        if m.feature_ids != self.feature_ids:
            raise ValueError("feature ids do not match scaling parameters")
        span = self.maxs - self.mins
        out = np.zeros_like(m.values)
        nz = span > 0
        out[:, nz] = (m.values[:, nz] - self.mins[nz]) / span[nz]
        return FeatureMatrix(case_ids=list(m.case_ids),
                             feature_ids=list(m.feature_ids), values=out)


def minmax_normalize(train: FeatureMatrix,
                     apply_to: "FeatureMatrix | list[FeatureMatrix] | None" = None):
    """Per-feature (x - min)/(max - min) fitted on ``train``.

    Constant training columns map to 0 everywhere; applied values outside
    the training range are kept (no clipping). ``apply_to`` may be a single
    matrix or a list. Returns (scaled train, scaled apply_to, MinMaxScaling).
    """
    if len(train.case_ids) == 0:
        raise ValueError("minmax_normalize requires a nonempty train matrix")
    scaling = MinMaxScaling(feature_ids=list(train.feature_ids),
                            mins=train.values.min(axis=0),
                            maxs=train.values.max(axis=0))
    scaled_train = scaling.apply(train)
    if apply_to is None:
        scaled_apply = None
    elif isinstance(apply_to, list):
        scaled_apply = [scaling.apply(m) for m in apply_to]
    else:
        scaled_apply = scaling.apply(apply_to)
    return scaled_train, scaled_apply, scaling
