"""Stable feature registry: ordered feature ids grouped by family."""

from __future__ import annotations

from dataclasses import dataclass

from . import firstorder, glcm, glrlm, moments, ngldm, ngtdm, shape, zones

REGISTRY_VERSION = "1.0"


@dataclass(frozen=True)
class RegistryEntry:
    feature_id: str
    family: str
    definition_ref: str


def _entries() -> list[RegistryEntry]:
    out = []
    for name in firstorder.FEATURE_NAMES:
        out.append(RegistryEntry(f"fo_{name}", "firstorder",
                                 "intensity statistics / histogram / IVH"))
    for name in shape.FEATURE_NAMES:
        out.append(RegistryEntry(f"shape_{name}", "shape",
                                 "voxel morphology"))
    for agg in ("avg", "mrg"):
        for name in glcm.FEATURE_NAMES:
            out.append(RegistryEntry(f"glcm_{agg}_{name}", "glcm",
                                     f"co-occurrence, {agg} over 13 offsets"))
    for agg in ("avg", "mrg"):
        for name in glrlm.FEATURE_NAMES:
            out.append(RegistryEntry(f"glrlm_{agg}_{name}", "glrlm",
                                     f"run length, {agg} over 13 directions"))
    for name in zones.GLSZM_NAMES:
        out.append(RegistryEntry(f"glszm_{name}", "glszm",
                                 "size zones, 26-connectivity"))
    for name in zones.GLDZM_NAMES:
        out.append(RegistryEntry(f"gldzm_{name}", "gldzm",
                                 "distance zones, Chebyshev border distance"))
    for name in ngtdm.FEATURE_NAMES:
        out.append(RegistryEntry(f"ngtdm_{name}", "ngtdm",
                                 "gray-tone difference, 26-neighborhood"))
    for name in ngldm.FEATURE_NAMES:
        out.append(RegistryEntry(f"ngldm_{name}", "ngldm",
                                 "dependence counts, alpha=0, radius 1"))
    for name in moments.FEATURE_NAMES:
        out.append(RegistryEntry(f"mom_{name}", "moments",
                                 "translation-invariant moment combinations"))
    return out


class FeatureRegistry:
    def __init__(self):
        self.entries = _entries()
        ids = [e.feature_id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate feature ids in registry")
        self.feature_ids = ids
        self.version = REGISTRY_VERSION

    def family_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.entries:
            counts[e.family] = counts.get(e.family, 0) + 1
        return counts

    def __len__(self) -> int:
        return len(self.entries)

    def to_json_dict(self) -> dict:
        return {
            "version": self.version,
            "n_features": len(self),
            "family_counts": self.family_counts(),
            "features": [
                {"feature_id": e.feature_id, "family": e.family,
                 "definition_ref": e.definition_ref}
                for e in self.entries
            ],
        }


_DEFAULT: FeatureRegistry | None = None


def default_registry() -> FeatureRegistry:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = FeatureRegistry()
    return _DEFAULT
