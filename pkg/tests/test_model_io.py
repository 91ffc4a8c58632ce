import numpy as np
import pytest

from oodkit.data import FeatureMatrix, LabeledDataset
from oodkit.errors import FileFormatError, ValidationError
from oodkit.lof import LofConfig, fit_lof, score_lof_batch
from oodkit.mahalanobis import fit_mahalanobis, score_mahalanobis_batch
from oodkit.model_io import load_model, save_model


def _dataset(rng, n=40, d=3):
    x = np.concatenate([rng.standard_normal((n, d)), rng.standard_normal((n, d)) + 5.0])
    labels = np.array([0] * n + [1] * n)
    return LabeledDataset(FeatureMatrix(x), labels)


@pytest.mark.parametrize("mode,metric", [("global", "euclidean"), ("per_class", "cosine")])
def test_lof_model_roundtrip_scores_bit_identical(tmp_path, mode, metric):
    rng = np.random.default_rng(60)
    ds = _dataset(rng)
    model = fit_lof(ds, LofConfig(k=5, metric=metric, mode=mode))
    path = tmp_path / "m.oodm"
    save_model(model, path)
    back = load_model(path)
    assert back.config == model.config
    assert back.class_ids == model.class_ids
    queries = rng.standard_normal((10, 3)) + 2.0
    assert score_lof_batch(back, queries).tobytes() == score_lof_batch(model, queries).tobytes()


@pytest.mark.parametrize("shared", [True, False])
def test_mahalanobis_model_roundtrip(tmp_path, shared):
    rng = np.random.default_rng(61)
    ds = _dataset(rng)
    model = fit_mahalanobis(ds, shared_covariance=shared)
    path = tmp_path / "m.oodm"
    save_model(model, path)
    back = load_model(path)
    assert back.class_ids == model.class_ids
    assert back.shared_covariance == model.shared_covariance
    assert np.array_equal(back.epsilons, model.epsilons)
    queries = rng.standard_normal((10, 3))
    assert (
        score_mahalanobis_batch(back, queries).tobytes()
        == score_mahalanobis_batch(model, queries).tobytes()
    )


def test_bad_magic_and_truncation(tmp_path):
    path = tmp_path / "junk.oodm"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(FileFormatError, match="magic"):
        load_model(path)

    rng = np.random.default_rng(62)
    good = tmp_path / "good.oodm"
    save_model(fit_lof(_dataset(rng), LofConfig(k=5)), good)
    good.write_bytes(good.read_bytes()[:-12])
    with pytest.raises(FileFormatError, match="truncated"):
        load_model(good)


def test_unknown_object_rejected(tmp_path):
    with pytest.raises(ValidationError):
        save_model(object(), tmp_path / "x.oodm")
