"""Run configuration, canonical hashing, and run records."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


@dataclass
class PipelineConfig:
    manifest: str = ""
    out_dir: str = "out"
    target_dims: tuple[int, int, int] = (64, 64, 64)
    margin: int = 5
    connectivity: int = 26
    zscore_stage: str = "cropped"
    bin_count: int = 32
    hausdorff_percentile: float = 95.0
    folds: int = 5
    seed: int = 0
    confidence_tau: float = 0.0
    paradigms: tuple[str, ...] = ("SL", "SSL")
    reducers: list = field(default_factory=lambda: [
        {"method": "anova_f", "k_out": 10},
        {"method": "pca", "k_out": 10},
    ])
    classifiers: list = field(default_factory=lambda: [
        {"method": "logistic_regression"},
        {"method": "random_forest"},
    ])
    external_tags: list = field(default_factory=list)
    unlabeled_tags: list = field(default_factory=list)
    mask_sources: list = field(default_factory=lambda: ["gt"])
    phantom: dict = field(default_factory=dict)
    perturbations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target_dims"] = list(self.target_dims)
        d["paradigms"] = list(self.paradigms)
        return d

    def hash(self) -> str:
        return config_hash(self.to_dict())

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path) as f:
            raw = json.load(f)
        cfg = cls()
        for key, value in raw.items():
            if not hasattr(cfg, key):
                raise ValueError(f"unknown config key {key!r}")
            if key == "target_dims":
                value = tuple(value)
            if key == "paradigms":
                value = tuple(value)
            setattr(cfg, key, value)
        if cfg.zscore_stage not in ("whole", "cropped"):
            raise ValueError("zscore_stage must be 'whole' or 'cropped'")
        return cfg


@dataclass
class RunRecord:
    config_hash: str
    registry_version: str
    tool_version: str
    started: float = field(default_factory=time.time)
    stages: dict = field(default_factory=dict)

    def mark(self, stage: str, status: str) -> None:
        self.stages[stage] = status

    def write(self, path) -> None:
        with open(path, "w") as f:
            json.dump({"config_hash": self.config_hash,
                       "registry_version": self.registry_version,
                       "tool_version": self.tool_version,
                       "started": self.started,
                       "stages": self.stages}, f, indent=2)
