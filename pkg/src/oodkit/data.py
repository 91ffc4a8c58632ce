"""Domain containers and feature-file I/O.

Feature files use the binary OODF container (all integers little-endian):

    offset  size        field
    0       4           magic ``b"OODF"``
    4       u16         version (currently 1)
    6       u16         flags: bit0 labels present, bit1 predicted labels
                        present, bit2 spatial layout
    8       u16         layer-name length L
    10      L bytes     layer name, UTF-8
    ..      u64         n (rows for flat files, maps for spatial files)
    ..      u64         flat: d   |   spatial: c, h, w (u64 each)
    ..      f32 * N     payload, row-major; N = n*d or n*c*h*w
    ..      i64 * n     labels        (only if bit0)
    ..      i64 * n     predicted labels  (only if bit1)

Values are stored as 32-bit floats (typical network export precision);
detectors upcast to float64 internally.  Label value -1 means "unlabeled".

A CSV fallback is accepted on read for hand-made fixtures: comma-separated
floats, no header, optionally a final all-integer column interpreted as
labels (only when the file has at least two columns).  Binary OODF is the
canonical format; ``write_feature_file`` always writes OODF.
"""

import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import FileFormatError, ValidationError

MAGIC = b"OODF"
VERSION = 1

_FLAG_LABELS = 1
_FLAG_PREDICTED = 2
_FLAG_SPATIAL = 4

_INT_TOKEN = re.compile(r"^[+-]?\d+$")


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{what} contains NaN or Inf")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FeatureMatrix:
    """n x d matrix of flat embedding vectors for one network layer.

    Values are held as float32 (the on-disk precision). n >= 1, d >= 1,
    all values finite.
    """

    values: np.ndarray
    layer_name: str = ""

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ValidationError(f"feature matrix must be 2-D, got shape {v.shape}")
        n, d = v.shape
        if n < 1 or d < 1:
            raise ValidationError(f"feature matrix needs n >= 1 and d >= 1, got {n}x{d}")
        _check_finite(v, "feature matrix")
        v = np.ascontiguousarray(v, dtype=np.float32)
        object.__setattr__(self, "values", _freeze(v))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def as_float64(self) -> np.ndarray:
        """Copy of the values upcast for internal arithmetic."""
        return self.values.astype(np.float64)


@dataclass(frozen=True)
class SpatialFeatureMap:
    """One c x h x w activation tensor, the input to pooling."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3:
            raise ValidationError(f"spatial map must be 3-D (c,h,w), got shape {v.shape}")
        if min(v.shape) < 1:
            raise ValidationError(f"spatial map dims must all be >= 1, got {v.shape}")
        _check_finite(v, "spatial map")
        v = np.ascontiguousarray(v, dtype=np.float32)
        object.__setattr__(self, "values", _freeze(v))

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def _check_labels(labels, n: int, what: str) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValidationError(f"{what} must be a length-{n} vector, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValidationError(f"{what} must be integers")
    arr = arr.astype(np.int64)
    if np.any(arr < -1):
        raise ValidationError(f"{what} must be >= -1 (-1 means unlabeled)")
    return _freeze(arr)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus per-row class ids (and optional CNN predictions)."""

    features: FeatureMatrix
    labels: np.ndarray
    predicted_labels: np.ndarray | None = None

    def __post_init__(self):
        n = self.features.rows
        object.__setattr__(self, "labels", _check_labels(self.labels, n, "labels"))
        if self.predicted_labels is not None:
            object.__setattr__(
                self,
                "predicted_labels",
                _check_labels(self.predicted_labels, n, "predicted labels"),
            )

    @property
    def num_classes(self) -> int:
        labeled = self.labels[self.labels >= 0]
        return int(labeled.max()) + 1 if labeled.size else 0

    def class_rows(self, class_id: int) -> np.ndarray:
        """Row indices carrying the given label."""
        return np.flatnonzero(self.labels == class_id)


@dataclass(frozen=True)
class SpatialDataset:
    """A stack of n spatial maps sharing c,h,w, as stored in one OODF file."""

    maps: np.ndarray  # (n, c, h, w) float32
    layer_name: str = ""
    labels: np.ndarray | None = None
    predicted_labels: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.maps)
        if v.ndim != 4 or min(v.shape) < 1:
            raise ValidationError(f"spatial stack must be (n,c,h,w), got shape {v.shape}")
        _check_finite(v, "spatial stack")
        v = np.ascontiguousarray(v, dtype=np.float32)
        object.__setattr__(self, "maps", _freeze(v))
        n = v.shape[0]
        if self.labels is not None:
            object.__setattr__(self, "labels", _check_labels(self.labels, n, "labels"))
        if self.predicted_labels is not None:
            object.__setattr__(
                self,
                "predicted_labels",
                _check_labels(self.predicted_labels, n, "predicted labels"),
            )

    def __len__(self) -> int:
        return self.maps.shape[0]

    def __getitem__(self, i: int) -> SpatialFeatureMap:
        return SpatialFeatureMap(self.maps[i])


@dataclass(frozen=True)
class ScoreSet:
    """Paired confidence scores for evaluation.

    Orientation is fixed package-wide: larger score = more in-distribution.
    """

    in_scores: np.ndarray
    out_scores: np.ndarray

    def __post_init__(self):
        for name in ("in_scores", "out_scores"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if arr.size == 0:
                raise ValidationError(f"{name} must be non-empty")
            _check_finite(arr, name)
            object.__setattr__(self, name, _freeze(arr))


Writable = Union[LabeledDataset, FeatureMatrix, SpatialDataset, Sequence[SpatialFeatureMap]]
Readable = Union[LabeledDataset, FeatureMatrix, SpatialDataset]


def write_feature_file(dataset: Writable, path) -> None:
    """Write a dataset to an OODF file (validates before touching disk)."""
    if isinstance(dataset, (list, tuple)):
        if not dataset:
            raise ValidationError("cannot write an empty sequence of spatial maps")
        if not all(isinstance(m, SpatialFeatureMap) for m in dataset):
            raise ValidationError("sequence items must all be SpatialFeatureMap")
        shapes = {m.values.shape for m in dataset}
        if len(shapes) != 1:
            raise ValidationError(f"spatial maps disagree in shape: {sorted(shapes)}")
        dataset = SpatialDataset(np.stack([m.values for m in dataset]))

    if isinstance(dataset, SpatialDataset):
        payload = dataset.maps
        dims = payload.shape[1:]
        spatial = True
        labels, predicted = dataset.labels, dataset.predicted_labels
        name = dataset.layer_name
    elif isinstance(dataset, LabeledDataset):
        payload = dataset.features.values
        dims = (dataset.features.dim,)
        spatial = False
        labels, predicted = dataset.labels, dataset.predicted_labels
        name = dataset.features.layer_name
    elif isinstance(dataset, FeatureMatrix):
        payload = dataset.values
        dims = (dataset.dim,)
        spatial = False
        labels = predicted = None
        name = dataset.layer_name
    else:
        raise ValidationError(f"cannot write object of type {type(dataset).__name__}")

    flags = 0
    if labels is not None:
        flags |= _FLAG_LABELS
    if predicted is not None:
        flags |= _FLAG_PREDICTED
    if spatial:
        flags |= _FLAG_SPATIAL

    name_bytes = name.encode("utf-8")
    if len(name_bytes) > 0xFFFF:
        raise ValidationError("layer name longer than 65535 bytes")

    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<HHH", VERSION, flags, len(name_bytes))
    blob += name_bytes
    blob += struct.pack("<Q", payload.shape[0])
    blob += struct.pack(f"<{len(dims)}Q", *dims)
    blob += np.ascontiguousarray(payload, dtype="<f4").tobytes()
    if labels is not None:
        blob += labels.astype("<i8").tobytes()
    if predicted is not None:
        blob += predicted.astype("<i8").tobytes()
    Path(path).write_bytes(bytes(blob))


class _Cursor:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, size: int, what: str) -> bytes:
        if self.pos + size > len(self.buf):
            raise FileFormatError(f"{self.path}: truncated file while reading {what}")
        out = self.buf[self.pos : self.pos + size]
        self.pos += size
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        raw = self.take(itemsize * count, what)
        return np.frombuffer(raw, dtype=dtype).copy()


def read_feature_file(path) -> Readable:
    """Read an OODF (or fixture CSV) file back into a validated container."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        parsed = _try_csv(raw)
        if parsed is not None:
            return parsed
        raise FileFormatError(
            f"{path}: bad magic {raw[:4]!r} (expected {MAGIC!r}) and not parseable as CSV"
        )

    cur = _Cursor(raw, path)
    cur.take(4, "magic")
    version, flags, name_len = cur.unpack("<HHH", "header")
    if version != VERSION:
        raise FileFormatError(f"{path}: unsupported OODF version {version}")
    name = cur.take(name_len, "layer name").decode("utf-8")
    (n,) = cur.unpack("<Q", "row count")
    spatial = bool(flags & _FLAG_SPATIAL)
    if spatial:
        c, h, w = cur.unpack("<QQQ", "spatial dims")
        shape = (n, c, h, w)
    else:
        (d,) = cur.unpack("<Q", "feature dim")
        shape = (n, d)
    count = int(np.prod(shape))
    if count > len(raw):  # cheap overflow guard before allocating
        raise FileFormatError(f"{path}: truncated file while reading payload")
    values = cur.array("<f4", count, "payload").reshape(shape)
    if not np.all(np.isfinite(values)):
        raise FileFormatError(f"{path}: payload contains non-finite values")

    labels = cur.array("<i8", n, "labels") if flags & _FLAG_LABELS else None
    predicted = cur.array("<i8", n, "predicted labels") if flags & _FLAG_PREDICTED else None

    if spatial:
        return SpatialDataset(values, layer_name=name, labels=labels, predicted_labels=predicted)
    fm = FeatureMatrix(values, layer_name=name)
    if labels is None and predicted is None:
        return fm
    if labels is None:
        labels = np.full(n, -1, dtype=np.int64)
    return LabeledDataset(fm, labels, predicted_labels=predicted)


def _try_csv(raw: bytes) -> Readable | None:
    """Parse headerless comma-separated floats; final all-integer column = labels."""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        return None
    rows = [line.split(",") for line in text.splitlines() if line.strip()]
    if not rows:
        return None
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        return None
    try:
        values = [[float(tok) for tok in r] for r in rows]
    except ValueError:
        return None
    has_labels = width >= 2 and all(_INT_TOKEN.match(r[-1].strip()) for r in rows)
    matrix = np.array(values, dtype=np.float64)
    if has_labels:
        features = FeatureMatrix(matrix[:, :-1])
        return LabeledDataset(features, matrix[:, -1].astype(np.int64))
    return FeatureMatrix(matrix)
