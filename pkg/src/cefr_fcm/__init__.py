"""Fuzzy C-Means proficiency levels for computational-thinking score vectors."""

from cefr_fcm.classify import (
    ClassificationRecord,
    ClassificationType,
    CertaintyBand,
    certainty,
    certainty_band,
    classify,
    classify_batch,
    classify_type,
    continuous_score,
)
from cefr_fcm.dataset import (
    DIMENSIONS,
    TABLE2_CENTROIDS,
    Dataset,
    SplitSpec,
    load_csv,
    save_dataset,
    stratified_split,
    synthesize,
)
from cefr_fcm.errors import (
    CefrFcmError,
    EmptyInputError,
    InfeasibleError,
    NoCefrLabelsError,
    SchemaError,
)
from cefr_fcm.fcm import FcmConfig, FcmModel, fit, grid_search, memberships, memberships_batch
from cefr_fcm.ordering import CefrLevel, OrderedFcmModel, level_profile, order_clusters, sj
from cefr_fcm.thresholds import ClassifyThresholds

__version__ = "0.1.0"

__all__ = [
    "DIMENSIONS",
    "TABLE2_CENTROIDS",
    "CefrFcmError",
    "CefrLevel",
    "CertaintyBand",
    "ClassificationRecord",
    "ClassificationType",
    "ClassifyThresholds",
    "Dataset",
    "EmptyInputError",
    "FcmConfig",
    "FcmModel",
    "InfeasibleError",
    "NoCefrLabelsError",
    "OrderedFcmModel",
    "SchemaError",
    "SplitSpec",
    "certainty",
    "certainty_band",
    "classify",
    "classify_batch",
    "classify_type",
    "continuous_score",
    "fit",
    "grid_search",
    "level_profile",
    "load_csv",
    "memberships",
    "memberships_batch",
    "order_clusters",
    "save_dataset",
    "sj",
    "stratified_split",
    "synthesize",
]
