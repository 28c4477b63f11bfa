from .discretize import DiscretizationConfig, DiscretizedROI, discretize
from .extract import (FeatureMatrix, FeatureVector, MinMaxScaling,
                      extract_all, minmax_normalize)
from .firstorder import firstorder_features
from .moments import moment_invariants
from .registry import FeatureRegistry, default_registry
from .shape import shape_features
from .texture_common import OFFSETS_13, OFFSETS_26, GrayLevelMatrix

__all__ = [
    "DiscretizationConfig", "DiscretizedROI", "discretize",
    "FeatureMatrix", "FeatureVector", "MinMaxScaling",
    "extract_all", "minmax_normalize",
    "firstorder_features", "moment_invariants",
    "FeatureRegistry", "default_registry", "shape_features",
    "OFFSETS_13", "OFFSETS_26", "GrayLevelMatrix",
]
