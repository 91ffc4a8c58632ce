"""oodkit: nonparametric LOF-based out-of-distribution scoring for deep
feature embeddings, with a Mahalanobis baseline, layer-score ensembling,
spatial pooling, the standard OoD metric suite, and a synthetic
high-dimensional benchmark."""

from .data import (
    FeatureMatrix,
    LabeledDataset,
    ScoreSet,
    SpatialDataset,
    SpatialFeatureMap,
    read_feature_file,
    write_feature_file,
)
from .ensemble import EnsembleWeights, LayerScores, combine, fit_weights, single_layer_weights
from .errors import FileFormatError, NumericError, OodkitError, ValidationError
from .lof import LofConfig, LofModel, fit_lof, knn, score_lof, score_lof_batch
from .mahalanobis import (
    MahalanobisModel,
    fit_mahalanobis,
    score_mahalanobis,
    score_mahalanobis_batch,
)
from .metrics import EvalReport, aupr, auroc, dtacc, evaluate, format_table, tnr_at_tpr95
from .pooling import PoolingSpec, pool, pool_dataset
from .simulation import SimConfig, calibrate_offset, generate, run_sweep

__version__ = "0.1.0"

__all__ = [
    "EnsembleWeights",
    "EvalReport",
    "FeatureMatrix",
    "FileFormatError",
    "LabeledDataset",
    "LayerScores",
    "LofConfig",
    "LofModel",
    "MahalanobisModel",
    "NumericError",
    "OodkitError",
    "PoolingSpec",
    "ScoreSet",
    "SimConfig",
    "SpatialDataset",
    "SpatialFeatureMap",
    "ValidationError",
    "aupr",
    "auroc",
    "calibrate_offset",
    "combine",
    "dtacc",
    "evaluate",
    "fit_lof",
    "fit_mahalanobis",
    "fit_weights",
    "format_table",
    "generate",
    "knn",
    "pool",
    "pool_dataset",
    "read_feature_file",
    "run_sweep",
    "score_lof",
    "score_lof_batch",
    "score_mahalanobis",
    "score_mahalanobis_batch",
    "single_layer_weights",
    "tnr_at_tpr95",
    "write_feature_file",
]
