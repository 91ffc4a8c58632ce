import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oodkit.data import (
    FeatureMatrix,
    LabeledDataset,
    ScoreSet,
    SpatialDataset,
    SpatialFeatureMap,
    read_feature_file,
    write_feature_file,
)
from oodkit.errors import FileFormatError, ValidationError


def test_smallest_file_size_is_fixed_by_layout(tmp_path):
    # header 4+2+2+2 + name + n(8) + d(8) + payload(4) = 30 + len(name)
    path = tmp_path / "one.oodf"
    write_feature_file(FeatureMatrix([[0.0]]), path)
    assert path.stat().st_size == 30
    assert read_feature_file(path).values.tolist() == [[0.0]]

    named = tmp_path / "named.oodf"
    write_feature_file(FeatureMatrix([[0.0]], layer_name="layer_0"), named)
    assert named.stat().st_size == 30 + len("layer_0")


def test_roundtrip_random_matrix_bit_exact(tmp_path):
    rng = np.random.default_rng(7)
    fm = FeatureMatrix(rng.standard_normal((100, 64)), layer_name="block4")
    path = tmp_path / "m.oodf"
    write_feature_file(fm, path)
    back = read_feature_file(path)
    assert isinstance(back, FeatureMatrix)
    assert back.layer_name == "block4"
    assert back.values.tobytes() == fm.values.tobytes()


def test_nan_rejected_and_no_file_written(tmp_path):
    path = tmp_path / "bad.oodf"
    with pytest.raises(ValidationError):
        FeatureMatrix([[np.nan]])
    with pytest.raises(ValidationError):
        write_feature_file([SpatialFeatureMap(np.zeros((1, 1, 1))), "nope"], path)
    assert not path.exists()


def test_bad_magic_is_an_error(tmp_path):
    path = tmp_path / "x.oodf"
    path.write_bytes(b"XXXX" + b"\x00" * 30)
    with pytest.raises(FileFormatError, match="magic"):
        read_feature_file(path)


def test_unsupported_version(tmp_path):
    path = tmp_path / "v9.oodf"
    write_feature_file(FeatureMatrix([[1.0]]), path)
    raw = bytearray(path.read_bytes())
    raw[4:6] = struct.pack("<H", 9)
    path.write_bytes(bytes(raw))
    with pytest.raises(FileFormatError, match="version"):
        read_feature_file(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.oodf"
    write_feature_file(FeatureMatrix(np.ones((4, 4))), path)
    path.write_bytes(path.read_bytes()[:-7])
    with pytest.raises(FileFormatError, match="truncated"):
        read_feature_file(path)


def test_nonfinite_payload_rejected_on_read(tmp_path):
    path = tmp_path / "inf.oodf"
    write_feature_file(FeatureMatrix([[1.0, 2.0]]), path)
    raw = bytearray(path.read_bytes())
    raw[-8:-4] = struct.pack("<f", np.inf)
    path.write_bytes(bytes(raw))
    with pytest.raises(FileFormatError, match="non-finite"):
        read_feature_file(path)


def test_csv_fallback():
    import tempfile, pathlib

    with tempfile.TemporaryDirectory() as d:
        p = pathlib.Path(d) / "fixture.csv"
        p.write_text("0.5,1.5\n2.5,3.5")
        fm = read_feature_file(p)
        assert isinstance(fm, FeatureMatrix)
        assert fm.values.tolist() == [[0.5, 1.5], [2.5, 3.5]]

        p.write_text("0.5,1.5,0\n2.5,3.5,1")
        ds = read_feature_file(p)
        assert isinstance(ds, LabeledDataset)
        assert ds.labels.tolist() == [0, 1]
        assert ds.features.dim == 2


def test_labeled_roundtrip_with_predictions(tmp_path):
    rng = np.random.default_rng(3)
    ds = LabeledDataset(
        FeatureMatrix(rng.standard_normal((10, 3)), layer_name="fc"),
        labels=rng.integers(0, 4, 10),
        predicted_labels=rng.integers(0, 4, 10),
    )
    path = tmp_path / "l.oodf"
    write_feature_file(ds, path)
    back = read_feature_file(path)
    assert isinstance(back, LabeledDataset)
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.predicted_labels, ds.predicted_labels)
    assert back.features.values.tobytes() == ds.features.values.tobytes()


def test_spatial_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    maps = [SpatialFeatureMap(rng.standard_normal((3, 2, 2))) for _ in range(4)]
    path = tmp_path / "s.oodf"
    write_feature_file(maps, path)
    back = read_feature_file(path)
    assert isinstance(back, SpatialDataset)
    assert back.maps.shape == (4, 3, 2, 2)
    assert back.maps.tobytes() == np.stack([m.values for m in maps]).tobytes()
    assert back[0].channels == 3


def test_label_invariants():
    fm = FeatureMatrix(np.zeros((3, 2)))
    with pytest.raises(ValidationError):
        LabeledDataset(fm, np.array([0, 1]))  # wrong length
    with pytest.raises(ValidationError):
        LabeledDataset(fm, np.array([0, 1, -2]))  # below the -1 sentinel
    ds = LabeledDataset(fm, np.array([0, -1, 2]))
    assert ds.num_classes == 3
    assert ds.class_rows(0).tolist() == [0]


def test_scoreset_invariants():
    with pytest.raises(ValidationError):
        ScoreSet(np.array([]), np.array([1.0]))
    with pytest.raises(ValidationError):
        ScoreSet(np.array([np.inf]), np.array([1.0]))


def test_containers_are_immutable():
    fm = FeatureMatrix([[1.0, 2.0]])
    with pytest.raises(ValueError):
        fm.values[0, 0] = 5.0


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 12),
    d=st.integers(1, 8),
    with_labels=st.booleans(),
    name=st.text(
        alphabet=st.characters(min_codepoint=32, max_codepoint=0x2FF), max_size=12
    ),
    seed=st.integers(0, 2**31 - 1),
)
def test_roundtrip_property(tmp_path_factory, n, d, with_labels, name, seed):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((n, d)).astype(np.float32)
    path = tmp_path_factory.mktemp("rt") / "f.oodf"
    if with_labels:
        dataset = LabeledDataset(
            FeatureMatrix(values, layer_name=name), rng.integers(-1, 5, n)
        )
        write_feature_file(dataset, path)
        back = read_feature_file(path)
        assert np.array_equal(back.labels, dataset.labels)
        values_back = back.features
    else:
        write_feature_file(FeatureMatrix(values, layer_name=name), path)
        back = read_feature_file(path)
        values_back = back
    assert values_back.layer_name == name
    assert values_back.values.tobytes() == values.tobytes()
    # the other composition: rewriting what was read reproduces the bytes
    second = path.with_suffix(".again")
    write_feature_file(back, second)
    assert second.read_bytes() == path.read_bytes()
