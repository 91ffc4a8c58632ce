"""Weighted combination of per-layer confidence scores.

combine() applies out_i = bias + sum_l alpha_l * s_{l,i}.  fit_weights()
learns the alphas as a logistic regression separating in-distribution
(label 1) from OoD (label 0) validation scores, the published procedure of
the framework this package compares against.  The optimizer is a fixed,
fully deterministic full-batch gradient descent (standardized inputs,
zero init, lr 0.1, 2000 iterations, L2 1e-4), so fitted weights are
reproducible bit-for-bit.  A single-layer LayerScores is the "simplified"
last-layer mode: combine with alpha=[1], bias=0 and nothing to fit.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

LEARNING_RATE = 0.1
ITERATIONS = 2000
L2_STRENGTH = 1e-4


@dataclass(frozen=True)
class LayerScores:
    """Per-layer confidence arrays of equal length, one row per layer."""

    layer_names: tuple
    scores: np.ndarray  # (L, n) float64

    def __post_init__(self):
        names = tuple(str(n) for n in self.layer_names)
        arr = np.asarray(self.scores, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise ValidationError(f"scores must be (layers, samples), got shape {arr.shape}")
        if len(names) != arr.shape[0] or not names:
            raise ValidationError(
                f"{len(names)} layer names for {arr.shape[0]} score rows (need >= 1)"
            )
        if arr.shape[1] == 0:
            raise ValidationError("scores must be non-empty")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("scores contain NaN or Inf")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "layer_names", names)
        object.__setattr__(self, "scores", arr)

    @property
    def n_layers(self) -> int:
        return self.scores.shape[0]

    @property
    def n_samples(self) -> int:
        return self.scores.shape[1]


@dataclass(frozen=True)
class EnsembleWeights:
    layer_names: tuple
    alpha: np.ndarray
    bias: float = 0.0
    dropped_layers: tuple = field(default_factory=tuple)  # zero-variance, weight 0

    def __post_init__(self):
        names = tuple(str(n) for n in self.layer_names)
        a = np.asarray(self.alpha, dtype=np.float64).ravel()
        if a.shape[0] != len(names):
            raise ValidationError(f"{a.shape[0]} weights for {len(names)} layers")
        if not (np.all(np.isfinite(a)) and np.isfinite(self.bias)):
            raise ValidationError("weights must be finite")
        a.flags.writeable = False
        object.__setattr__(self, "layer_names", names)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "bias", float(self.bias))

    def to_json(self) -> str:
        payload = {
            "bias": self.bias,
            "layers": list(self.layer_names),  # order matters; alpha map is sorted
            "alpha": {name: float(a) for name, a in zip(self.layer_names, self.alpha)},
            "dropped_layers": list(self.dropped_layers),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnsembleWeights":
        payload = json.loads(text)
        names = tuple(payload.get("layers", payload["alpha"].keys()))
        return cls(
            layer_names=names,
            alpha=np.array([payload["alpha"][n] for n in names]),
            bias=payload["bias"],
            dropped_layers=tuple(payload.get("dropped_layers", ())),
        )


def combine(scores: LayerScores, weights: EnsembleWeights) -> np.ndarray:
    """bias + sum_l alpha_l * s_l for every sample."""
    if weights.layer_names != scores.layer_names:
        raise ValidationError(
            f"weight layers {weights.layer_names} do not match score layers {scores.layer_names}"
        )
    return weights.bias + weights.alpha @ scores.scores


def single_layer_weights(layer_name: str) -> EnsembleWeights:
    """The simplified last-layer mode: identity combination, nothing fitted."""
    return EnsembleWeights(layer_names=(layer_name,), alpha=np.array([1.0]), bias=0.0)


def fit_weights(val_in: LayerScores, val_out: LayerScores) -> EnsembleWeights:
    """Logistic-regression layer weights from validation in/out scores.

    Zero-variance layers are dropped (alpha 0) and listed in
    dropped_layers.  Weights are de-standardized before returning, so they
    apply directly to raw per-layer scores.
    """
    if val_in.layer_names != val_out.layer_names:
        raise ValidationError("validation in/out score layers differ")
    x = np.concatenate([val_in.scores, val_out.scores], axis=1).T  # (n, L)
    y = np.concatenate([np.ones(val_in.n_samples), np.zeros(val_out.n_samples)])

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    live = std > 0.0
    dropped = tuple(n for n, keep in zip(val_in.layer_names, live) if not keep)
    xs = (x[:, live] - mean[live]) / std[live]

    w = np.zeros(xs.shape[1])
    b = 0.0
    n = xs.shape[0]
    for _ in range(ITERATIONS):
        z = np.clip(xs @ w + b, -500.0, 500.0)  # sigmoid saturates; avoids exp overflow
        p = 1.0 / (1.0 + np.exp(-z))
        residual = p - y
        w -= LEARNING_RATE * (xs.T @ residual / n + L2_STRENGTH * w)
        b -= LEARNING_RATE * residual.mean()

    alpha = np.zeros(val_in.n_layers)
    alpha[live] = w / std[live]
    bias = b - float(np.sum(w * mean[live] / std[live]))
    return EnsembleWeights(
        layer_names=val_in.layer_names, alpha=alpha, bias=bias, dropped_layers=dropped
    )
