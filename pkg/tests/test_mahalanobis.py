import numpy as np
import pytest

from oodkit.data import FeatureMatrix, LabeledDataset
from oodkit.errors import NumericError, ValidationError
from oodkit.mahalanobis import (
    MahalanobisModel,
    fit_mahalanobis,
    score_mahalanobis,
    score_mahalanobis_batch,
)

from .oracles import mahalanobis_fit, mahalanobis_score


def _f32(x):
    return np.asarray(x, dtype=np.float32).astype(np.float64)


def _dataset(x, labels):
    return LabeledDataset(FeatureMatrix(np.asarray(x)), np.asarray(labels, dtype=np.int64))


def _identity_model(means):
    means = np.asarray(means, dtype=np.float64)
    d = means.shape[1]
    eye = np.eye(d)
    return MahalanobisModel(
        class_ids=tuple(range(means.shape[0])),
        means=means,
        covariances=eye[None],
        precisions=eye[None],
        epsilons=np.array([0.0]),
        shared_covariance=True,
    )


def test_pooled_covariance_hand_example():
    ds = _dataset([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [0.0, 4.0]], [0, 0, 1, 1])
    model = fit_mahalanobis(ds, epsilon=0.0)
    assert np.allclose(model.means, [[1.0, 0.0], [0.0, 3.0]])
    assert np.allclose(model.covariances[0], [[0.5, 0.0], [0.0, 0.5]], atol=1e-15)


def test_large_sample_covariance_near_identity():
    rng = np.random.default_rng(30)
    x = rng.standard_normal((10000, 4))
    model = fit_mahalanobis(_dataset(x, np.zeros(10000)), epsilon=0.0)
    assert np.max(np.abs(model.covariances[0] - np.eye(4))) < 0.1


def test_degenerate_data_errors_after_escalation():
    x = np.ones((10, 3))
    with pytest.raises(NumericError):
        fit_mahalanobis(_dataset(x, np.zeros(10)), epsilon=0.0)


def test_query_at_mean_scores_zero():
    model = _identity_model([[0.0, 0.0], [5.0, 5.0]])
    assert score_mahalanobis(model, [0.0, 0.0]) == 0.0
    assert score_mahalanobis(model, [5.0, 5.0]) == 0.0


def test_identity_covariance_pythagorean():
    model = _identity_model([[0.0, 0.0]])
    assert abs(score_mahalanobis(model, [3.0, 4.0]) + 25.0) < 1e-12


def test_confidence_never_positive():
    rng = np.random.default_rng(31)
    x = rng.standard_normal((60, 4))
    model = fit_mahalanobis(_dataset(x, rng.integers(0, 2, 60)))
    scores = score_mahalanobis_batch(model, rng.standard_normal((100, 4)) * 3)
    assert np.all(scores <= 0.0)


@pytest.mark.parametrize("shared", [True, False])
def test_scores_match_dense_oracle(shared):
    rng = np.random.default_rng(32)
    for trial in range(6):
        d = int(rng.integers(2, 9))
        n = 40
        x = _f32(np.concatenate(
            [rng.standard_normal((n, d)), rng.standard_normal((n, d)) + 2.0]
        ))
        y = np.array([0] * n + [1] * n)
        eps = float(rng.choice([0.0, 1e-4, 0.3]))
        model = fit_mahalanobis(_dataset(x, y), epsilon=eps, shared_covariance=shared)
        means, precisions = mahalanobis_fit(x, y, epsilon=eps, shared=shared)
        queries = rng.standard_normal((50, d)) * 2.0
        got = score_mahalanobis_batch(model, queries)
        want = [mahalanobis_score(means, precisions, q) for q in queries]
        assert np.allclose(got, want, rtol=1e-10, atol=1e-12)


def test_affine_invariance_at_zero_epsilon():
    rng = np.random.default_rng(33)
    for _ in range(5):
        d = int(rng.integers(2, 9))
        x = np.concatenate(
            [rng.standard_normal((50, d)), rng.standard_normal((50, d)) + 1.5]
        )
        y = np.array([0] * 50 + [1] * 50)
        queries = rng.standard_normal((20, d)) * 2.0
        a = rng.standard_normal((d, d)) + np.eye(d) * 2.0  # comfortably invertible
        b = rng.standard_normal(d)
        base = score_mahalanobis_batch(fit_mahalanobis(_dataset(x, y), epsilon=0.0), queries)
        mapped = score_mahalanobis_batch(
            fit_mahalanobis(_dataset(x @ a + b, y), epsilon=0.0), queries @ a + b
        )
        assert np.allclose(base, mapped, rtol=1e-6, atol=1e-8)


def test_argmin_class_invariant_under_translation():
    rng = np.random.default_rng(34)
    x = np.concatenate([rng.standard_normal((30, 3)), rng.standard_normal((30, 3)) + 4.0])
    y = np.array([0] * 30 + [1] * 30)
    queries = rng.standard_normal((40, 3)) * 3.0
    shift = np.array([100.0, -50.0, 7.0])

    def argmin_classes(model, q):
        dists = []
        for i in range(len(model.class_ids)):
            p = model.precisions[0] if model.shared_covariance else model.precisions[i]
            diff = q - model.means[i]
            dists.append(np.einsum("nd,de,ne->n", diff, p, diff))
        return np.argmin(np.stack(dists), axis=0)

    m1 = fit_mahalanobis(_dataset(x, y), epsilon=0.0)
    m2 = fit_mahalanobis(_dataset(x + shift, y), epsilon=0.0)
    assert np.array_equal(argmin_classes(m1, queries), argmin_classes(m2, queries + shift))


def test_epsilon_validation_and_recording():
    rng = np.random.default_rng(35)
    x = rng.standard_normal((40, 3))
    y = np.zeros(40)
    with pytest.raises(ValidationError):
        fit_mahalanobis(_dataset(x, y), epsilon=-1.0)
    model = fit_mahalanobis(_dataset(x, y), epsilon=0.25)
    assert model.epsilons[0] == 0.25
    auto = fit_mahalanobis(_dataset(x, y))
    sigma = auto.covariances[0]
    assert np.isclose(auto.epsilons[0], 1e-6 * np.trace(sigma) / 3)


def test_escalation_recovers_from_singular_covariance():
    # constant third coordinate -> a zero covariance row, so epsilon=0 cannot
    # factorize, but the ladder 1e-6..1e-2 * trace/d rescues it
    t = np.linspace(0.0, 1.0, 30)
    x = np.stack([t, 2 * t, np.zeros_like(t)], axis=1)
    model = fit_mahalanobis(_dataset(x, np.zeros(30)), epsilon=0.0)
    assert model.epsilons[0] > 0.0
    assert np.all(np.isfinite(model.precisions))


def test_small_class_rejected():
    ds = _dataset([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], [0, 0, 1])
    with pytest.raises(ValidationError, match="class 1"):
        fit_mahalanobis(ds)


def test_score_validation():
    model = _identity_model([[0.0, 0.0]])
    with pytest.raises(ValidationError):
        score_mahalanobis(model, [1.0, 2.0, 3.0])
    with pytest.raises(ValidationError):
        score_mahalanobis_batch(model, np.array([[np.nan, 1.0]]))
