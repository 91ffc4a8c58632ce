"""Class-conditional Gaussian confidence scores (the parametric baseline).

Fits per-class means and a tied (pooled within-class) covariance

    Sigma = (1/n) * sum_c sum_{x in X_c} (x - mu_c)(x - mu_c)^T,

then scores a query by the squared Mahalanobis distance to the closest
class mean under the regularized precision (Sigma + eps*I)^-1, negated so
larger = more in-distribution.  Squared distance is monotone-equivalent to
the distance itself, which is all the ranking metrics need.

High-dimensional embeddings with ~1000 samples per class make Sigma
ill-conditioned; eps defaults to 1e-6 * trace(Sigma)/d and escalates by
factors of 10 up to 1e-2 * trace(Sigma)/d until a Cholesky factorization
succeeds.  Per-class covariances are available behind shared_covariance=False
but the tied form is the default.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .data import LabeledDataset
from .errors import NumericError, ValidationError

EPS_BASE_SCALE = 1e-6  # default eps = 1e-6 * trace(Sigma)/d
EPS_MAX_SCALE = 1e-2   # escalation cap


@dataclass(frozen=True)
class MahalanobisModel:
    class_ids: tuple           # sorted class ids
    means: np.ndarray          # (C, d)
    covariances: np.ndarray    # (1, d, d) tied or (C, d, d) per-class
    precisions: np.ndarray     # matching shape, from (Sigma + eps*I)^-1
    epsilons: np.ndarray       # regularization actually used, per covariance
    shared_covariance: bool

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _regularized_precision(sigma: np.ndarray, epsilon: float | None):
    """Invert Sigma + eps*I via Cholesky, escalating eps on failure."""
    d = sigma.shape[0]
    base = EPS_BASE_SCALE * np.trace(sigma) / d
    candidates = [base * 10.0**j for j in range(5)]  # up to 1e-2 * trace/d
    if epsilon is not None:
        if epsilon < 0:
            raise ValidationError(f"epsilon must be >= 0, got {epsilon}")
        candidates = [float(epsilon)] + [c for c in candidates if c > epsilon]
    for eps in candidates:
        try:
            chol = cho_factor(sigma + eps * np.eye(d), lower=True)
        except LinAlgError:
            continue
        precision = cho_solve(chol, np.eye(d))
        return 0.5 * (precision + precision.T), eps
    raise NumericError(
        "covariance factorization failed even at the escalation cap "
        f"(trace={np.trace(sigma):.3g}, d={d})"
    )


def fit_mahalanobis(
    train: LabeledDataset,
    epsilon: float | None = None,
    shared_covariance: bool = True,
) -> MahalanobisModel:
    """Fit per-class means and tied (or per-class) regularized precision.

    epsilon=None uses the trace-scaled default; an explicit value is tried
    first and still escalates through the default grid if factorization
    fails.  Every class needs at least 2 samples.
    """
    x = train.features.as_float64()
    class_ids = sorted(int(c) for c in np.unique(train.labels) if c >= 0)
    if not class_ids:
        raise ValidationError("training set has no labeled classes")

    means = []
    centered = []
    for cid in class_ids:
        rows = train.class_rows(cid)
        if rows.size < 2:
            raise ValidationError(f"class {cid} has {rows.size} samples; need >= 2")
        block = x[rows]
        mu = block.mean(axis=0)
        means.append(mu)
        centered.append(block - mu)
    means = np.stack(means)

    if shared_covariance:
        pooled = np.concatenate(centered)
        sigma = pooled.T @ pooled / pooled.shape[0]
        precision, eps = _regularized_precision(sigma, epsilon)
        covariances = sigma[None]
        precisions = precision[None]
        epsilons = np.array([eps])
    else:
        covariances, precisions, epsilons = [], [], []
        for block in centered:
            sigma = block.T @ block / block.shape[0]
            precision, eps = _regularized_precision(sigma, epsilon)
            covariances.append(sigma)
            precisions.append(precision)
            epsilons.append(eps)
        covariances = np.stack(covariances)
        precisions = np.stack(precisions)
        epsilons = np.array(epsilons)

    return MahalanobisModel(
        class_ids=tuple(class_ids),
        means=means,
        covariances=covariances,
        precisions=precisions,
        epsilons=epsilons,
        shared_covariance=shared_covariance,
    )


def score_mahalanobis_batch(model: MahalanobisModel, queries) -> np.ndarray:
    """Confidence = -min_c squared Mahalanobis distance, per query row."""
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim != 2:
        raise ValidationError(f"queries must be 2-D, got shape {q.shape}")
    if q.shape[1] != model.dim:
        raise ValidationError(f"query dim {q.shape[1]} does not match model dim {model.dim}")
    if not np.all(np.isfinite(q)):
        raise ValidationError("queries contain NaN or Inf")

    best = np.full(q.shape[0], np.inf)
    for i, _ in enumerate(model.class_ids):
        precision = model.precisions[0] if model.shared_covariance else model.precisions[i]
        diff = q - model.means[i]
        dist = np.einsum("nd,de,ne->n", diff, precision, diff)
        np.minimum(best, dist, out=best)
    # the quadratic form is PSD; clip away float-rounding sign noise
    return -np.maximum(best, 0.0)


def score_mahalanobis(model: MahalanobisModel, query) -> float:
    """Confidence of a single query vector (see score_mahalanobis_batch)."""
    q = np.asarray(query, dtype=np.float64).ravel()
    return float(score_mahalanobis_batch(model, q[None, :])[0])
