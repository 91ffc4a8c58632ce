"""Spatial-to-vector feature aggregation: gap, gmp, GeM, CroW, and concat.

All methods map a c x h x w activation tensor to a length-c vector
(concat yields the concatenation of its members' outputs).  Degenerate
1x1 spatial maps short-circuit to the raw channel values for every
method, since all aggregators coincide there.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import FeatureMatrix, LabeledDataset, SpatialDataset, SpatialFeatureMap
from .errors import ValidationError

SIMPLE_METHODS = ("gap", "gmp", "gem", "crow")


@dataclass(frozen=True)
class PoolingSpec:
    """Aggregation choice.  method: gap | gmp | gem | crow | concat.

    gem_power is the GeM exponent p (> 0, default 3).  For concat,
    members lists the simple methods to apply in order.
    """

    method: str
    gem_power: float = 3.0
    members: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.method not in SIMPLE_METHODS + ("concat",):
            raise ValidationError(f"unknown pooling method {self.method!r}")
        p = float(self.gem_power)
        if not np.isfinite(p) or p <= 0:
            raise ValidationError(f"gem power must be finite and > 0, got {self.gem_power}")
        object.__setattr__(self, "gem_power", p)
        members = tuple(self.members)
        if self.method == "concat":
            if not members:
                raise ValidationError("concat pooling needs a non-empty member list")
            for m in members:
                if m not in SIMPLE_METHODS:
                    raise ValidationError(f"concat member {m!r} is not a simple method")
        elif members:
            raise ValidationError("members are only meaningful for concat")
        object.__setattr__(self, "members", members)

    @classmethod
    def parse(cls, text: str, gem_power: float = 3.0) -> "PoolingSpec":
        """Parse CLI syntax: a method name, or 'concat:gap+gmp'."""
        text = text.strip().lower()
        if text.startswith("concat:"):
            members = tuple(m for m in text[len("concat:") :].split("+") if m)
            return cls("concat", gem_power=gem_power, members=members)
        return cls(text, gem_power=gem_power)


def pool(spatial_map: SpatialFeatureMap, spec: PoolingSpec) -> np.ndarray:
    """Reduce one spatial map to a flat float64 vector per the spec."""
    x = spatial_map.values.astype(np.float64)
    if spec.method == "concat":
        parts = [_pool_simple(x, m, spec.gem_power) for m in spec.members]
        return np.concatenate(parts)
    return _pool_simple(x, spec.method, spec.gem_power)


def _pool_simple(x: np.ndarray, method: str, gem_power: float) -> np.ndarray:
    c, h, w = x.shape
    if h == 1 and w == 1:
        return x[:, 0, 0].copy()
    if method == "gap":
        return x.mean(axis=(1, 2))
    if method == "gmp":
        return x.max(axis=(1, 2))
    if method == "gem":
        if np.any(x < 0):
            warnings.warn(
                "GeM input has negative activations; clamping to 0 (post-ReLU assumption)",
                RuntimeWarning,
                stacklevel=3,
            )
            x = np.maximum(x, 0.0)
        return np.power(np.power(x, gem_power).mean(axis=(1, 2)), 1.0 / gem_power)
    return _crow(x)


def _crow(x: np.ndarray) -> np.ndarray:
    # Spatial weight: alpha_ij = sqrt(S_ij / ||S||_2) with S_ij the channel
    # sum at (i,j); alpha = 0 where S <= 0 (sqrt undefined below zero).
    s = x.sum(axis=0)
    norm = np.sqrt(np.sum(s * s))
    if norm == 0.0:
        alpha = np.zeros_like(s)
    else:
        alpha = np.where(s > 0, np.sqrt(np.maximum(s, 0.0) / norm), 0.0)
    # Channel weight: beta_k = log(sum_k' Q_k' / Q_k) for the fraction Q_k of
    # nonzero locations in channel k; beta = 0 for entirely-zero channels.
    q = np.count_nonzero(x, axis=(1, 2)) / (x.shape[1] * x.shape[2])
    beta = np.zeros(x.shape[0])
    active = q > 0
    beta[active] = np.log(q.sum() / q[active])
    return beta * np.tensordot(x, alpha, axes=([1, 2], [0, 1]))


def pool_dataset(dataset: SpatialDataset, spec: PoolingSpec) -> FeatureMatrix | LabeledDataset:
    """Pool every map in a stack, carrying labels and the layer name through."""
    pooled = np.stack([pool(SpatialFeatureMap(m), spec) for m in dataset.maps])
    features = FeatureMatrix(pooled, layer_name=dataset.layer_name)
    if dataset.labels is None and dataset.predicted_labels is None:
        return features
    labels = dataset.labels
    if labels is None:
        labels = np.full(len(dataset), -1, dtype=np.int64)
    return LabeledDataset(features, labels, predicted_labels=dataset.predicted_labels)
