"""Local-outlier-factor confidence scoring, in global and per-class forms.

The model is fitted on reference (training) embeddings only: for every
reference point we precompute its k-distance (distance to the k-th nearest
*other* reference) and its local reachability density

    LRD_k(p) = |N_k(p)| / sum_{o in N_k(p)} max(k-distance(o), d(p, o)),

where N_k(p) contains every reference within k-distance(p) of p (the set
can exceed k under distance ties).  A query q is scored without being
inserted into the reference set:

    LOF(q) = sum_{o in N_k(q)} LRD(o) / (|N_k(q)| * LRD(q)),

and the returned confidence is -LOF(q), so larger means more
in-distribution.  Inliers sit near LOF = 1; outliers well above it.

The per-class mode fits one independent reference block per class and
scores a query against a single block: the class predicted by the
classifier when available, otherwise the class with the nearest centroid.
Scoring work therefore scales with one class's reference count, not the
whole training set.

Exact k-NN by full scan is used throughout; reference sets at the sizes
this package targets (<= ~100k points) keep that tractable and exactly
reproducible.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import FeatureMatrix, LabeledDataset
from .errors import ValidationError

# Reachability sums below this are clamped so duplicate-heavy reference
# sets yield large-but-finite densities instead of Inf.
MIN_REACH_SUM = 1e-300

GLOBAL_CLASS_ID = -1  # block id used when mode == "global"

METRICS = ("euclidean", "cosine")
MODES = ("global", "per_class")


@dataclass(frozen=True)
class LofConfig:
    k: int = 20
    metric: str = "euclidean"
    mode: str = "global"

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        if self.metric not in METRICS:
            raise ValidationError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class LofClassBlock:
    """Reference points of one class with their precomputed statistics."""

    refs: np.ndarray        # (n, d) float64
    k_distance: np.ndarray  # (n,)
    lrd: np.ndarray         # (n,)
    centroid: np.ndarray    # (d,)


@dataclass(frozen=True)
class LofModel:
    config: LofConfig
    blocks: dict  # class id -> LofClassBlock, keys sorted at fit time

    @property
    def dim(self) -> int:
        return next(iter(self.blocks.values())).refs.shape[1]

    @property
    def class_ids(self) -> tuple:
        return tuple(self.blocks.keys())


def _pairwise(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    """Exact dense distance matrix between rows of a and rows of b."""
    if metric == "euclidean":
        return cdist(a, b, "euclidean")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValidationError("zero-norm vector is undefined under the cosine metric")
    return 1.0 - (a / na[:, None]) @ (b / nb[:, None]).T


def knn(query: np.ndarray, refs, k: int, metric: str = "euclidean"):
    """k nearest references to one query: (indices, distances), ascending.

    Ties are broken toward the lower index, so the result is deterministic.
    """
    if isinstance(refs, FeatureMatrix):
        refs = refs.as_float64()
    refs = np.asarray(refs, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64).ravel()
    if query.shape[0] != refs.shape[1]:
        raise ValidationError(
            f"query dim {query.shape[0]} does not match reference dim {refs.shape[1]}"
        )
    if not 1 <= k <= refs.shape[0]:
        raise ValidationError(f"need 1 <= k <= n_refs, got k={k}, n_refs={refs.shape[0]}")
    dists = _pairwise(query[None, :], refs, metric)[0]
    order = np.argsort(dists, kind="stable")[:k]
    return order, dists[order]


def _fit_block(points: np.ndarray, k: int, metric: str) -> LofClassBlock:
    n = points.shape[0]
    dmat = _pairwise(points, points, metric)
    np.fill_diagonal(dmat, np.inf)  # k-distance is w.r.t. *other* points
    kdist = np.partition(dmat, k - 1, axis=1)[:, k - 1]
    neighbor = dmat <= kdist[:, None]  # all points at <= k-distance (ties included)
    counts = neighbor.sum(axis=1)
    reach = np.maximum(kdist[None, :], dmat)  # reach-dist_k(p, o) = max(kdist(o), d(p,o))
    reach_sum = np.where(neighbor, reach, 0.0).sum(axis=1)
    lrd = counts / np.maximum(reach_sum, MIN_REACH_SUM)
    return LofClassBlock(
        refs=points,
        k_distance=kdist,
        lrd=lrd,
        centroid=points.mean(axis=0),
    )


def fit_lof(train, config: LofConfig = LofConfig()) -> LofModel:
    """Fit LOF reference statistics on training embeddings.

    train is a LabeledDataset (required for per_class mode) or a
    FeatureMatrix / (n, d) array for global mode.
    """
    if config.mode == "per_class":
        if not isinstance(train, LabeledDataset):
            raise ValidationError("per_class mode needs a LabeledDataset with labels")
        x = train.features.as_float64()
        class_ids = sorted(int(c) for c in np.unique(train.labels) if c >= 0)
        if not class_ids:
            raise ValidationError("per_class mode needs at least one labeled class")
        blocks = {}
        for cid in class_ids:
            rows = train.class_rows(cid)
            if rows.size <= config.k:
                raise ValidationError(
                    f"class {cid} has {rows.size} points; need more than k={config.k}"
                )
            blocks[cid] = _fit_block(x[rows], config.k, config.metric)
        return LofModel(config=config, blocks=blocks)

    if isinstance(train, LabeledDataset):
        x = train.features.as_float64()
    elif isinstance(train, FeatureMatrix):
        x = train.as_float64()
    else:
        x = np.asarray(train, dtype=np.float64)
        if x.ndim != 2:
            raise ValidationError(f"training array must be 2-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("training array contains NaN or Inf")
    if x.shape[0] <= config.k:
        raise ValidationError(f"need more than k={config.k} training points, got {x.shape[0]}")
    return LofModel(config=config, blocks={GLOBAL_CLASS_ID: _fit_block(x, config.k, config.metric)})


def _score_against_block(queries: np.ndarray, block: LofClassBlock, k: int, metric: str):
    """Vectorized novelty LOF of each query row against one reference block."""
    dmat = _pairwise(queries, block.refs, metric)
    kdist_q = np.partition(dmat, k - 1, axis=1)[:, k - 1]
    neighbor = dmat <= kdist_q[:, None]
    counts = neighbor.sum(axis=1)
    reach = np.maximum(block.k_distance[None, :], dmat)
    reach_sum = np.where(neighbor, reach, 0.0).sum(axis=1)
    lrd_q = counts / np.maximum(reach_sum, MIN_REACH_SUM)
    neighbor_lrd_sum = np.where(neighbor, block.lrd[None, :], 0.0).sum(axis=1)
    return neighbor_lrd_sum / (counts * lrd_q)


def _assign_classes(model: LofModel, queries: np.ndarray) -> np.ndarray:
    """Nearest-centroid class under the configured metric (per_class fallback)."""
    ids = np.array(model.class_ids)
    centroids = np.stack([model.blocks[c].centroid for c in ids])
    dists = _pairwise(queries, centroids, model.config.metric)
    return ids[np.argmin(dists, axis=1)]


def score_lof_batch(model: LofModel, queries, predicted_classes=None) -> np.ndarray:
    """Confidence (-LOF) for each query row; larger = more in-distribution."""
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim != 2:
        raise ValidationError(f"queries must be 2-D, got shape {q.shape}")
    if q.shape[1] != model.dim:
        raise ValidationError(f"query dim {q.shape[1]} does not match model dim {model.dim}")
    if not np.all(np.isfinite(q)):
        raise ValidationError("queries contain NaN or Inf")
    cfg = model.config

    if cfg.mode == "global":
        block = model.blocks[GLOBAL_CLASS_ID]
        return -_score_against_block(q, block, cfg.k, cfg.metric)

    if predicted_classes is None:
        assigned = _assign_classes(model, q)
    else:
        assigned = np.asarray(predicted_classes, dtype=np.int64).ravel()
        if assigned.shape[0] != q.shape[0]:
            raise ValidationError("predicted_classes length does not match query count")
        known = set(model.class_ids)
        missing = assigned[assigned >= 0]
        bad = set(int(c) for c in missing) - known
        if bad:
            raise ValidationError(f"unknown class id(s) {sorted(bad)} in predictions")
        if np.any(assigned < 0):
            # -1 (unlabeled) predictions fall back to nearest centroid
            fallback = assigned < 0
            assigned = assigned.copy()
            assigned[fallback] = _assign_classes(model, q[fallback])

    out = np.empty(q.shape[0], dtype=np.float64)
    for cid in np.unique(assigned):
        rows = np.flatnonzero(assigned == cid)
        block = model.blocks[int(cid)]
        out[rows] = -_score_against_block(q[rows], block, cfg.k, cfg.metric)
    return out


def score_lof(model: LofModel, query, predicted_class: int | None = None) -> float:
    """Confidence of a single query vector (see score_lof_batch)."""
    q = np.asarray(query, dtype=np.float64).ravel()
    preds = None if predicted_class is None else np.array([predicted_class])
    return float(score_lof_batch(model, q[None, :], preds)[0])
