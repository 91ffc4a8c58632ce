"""Binary persistence for fitted detector models (the OODM container).

Layout (all integers little-endian, all floats f64 since models carry the
internal arithmetic precision):

    magic      4 bytes  b"OODM"
    version    u16      1
    detector   u16      1 = LOF, 2 = Mahalanobis

LOF body:

    k          u64
    metric     u8       0 euclidean, 1 cosine
    mode       u8       0 global, 1 per_class
    n_classes  u64      1 for global (class id -1)
    per class: class_id i64, n u64, d u64,
               refs f64*n*d row-major, k_distance f64*n, lrd f64*n,
               centroid f64*d

Mahalanobis body:

    shared     u8       1 tied covariance, 0 per-class
    n_classes  u64
    d          u64
    class_ids  i64 * n_classes
    means      f64 * n_classes*d
    n_cov      u64      number of covariance blocks (1 if shared)
    per block: epsilon f64, covariance f64*d*d, precision f64*d*d

Round-trips are bit-exact, so a model scored after save/load produces
byte-identical outputs.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import FileFormatError, ValidationError
from .lof import LofClassBlock, LofConfig, LofModel
from .mahalanobis import MahalanobisModel

MAGIC = b"OODM"
VERSION = 1

_DET_LOF = 1
_DET_MAHALANOBIS = 2

_METRIC_CODE = {"euclidean": 0, "cosine": 1}
_MODE_CODE = {"global": 0, "per_class": 1}
_METRIC_NAME = {v: k for k, v in _METRIC_CODE.items()}
_MODE_NAME = {v: k for k, v in _MODE_CODE.items()}


def _f64_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_model(model, path) -> None:
    """Serialize a fitted LofModel or MahalanobisModel to an OODM file."""
    blob = bytearray()
    blob += MAGIC
    if isinstance(model, LofModel):
        blob += struct.pack("<HH", VERSION, _DET_LOF)
        cfg = model.config
        blob += struct.pack(
            "<QBBQ", cfg.k, _METRIC_CODE[cfg.metric], _MODE_CODE[cfg.mode], len(model.blocks)
        )
        for cid, block in model.blocks.items():
            n, d = block.refs.shape
            blob += struct.pack("<qQQ", cid, n, d)
            blob += _f64_bytes(block.refs)
            blob += _f64_bytes(block.k_distance)
            blob += _f64_bytes(block.lrd)
            blob += _f64_bytes(block.centroid)
    elif isinstance(model, MahalanobisModel):
        blob += struct.pack("<HH", VERSION, _DET_MAHALANOBIS)
        n_classes = len(model.class_ids)
        d = model.dim
        blob += struct.pack("<BQQ", int(model.shared_covariance), n_classes, d)
        blob += np.asarray(model.class_ids, dtype="<i8").tobytes()
        blob += _f64_bytes(model.means)
        n_cov = model.covariances.shape[0]
        blob += struct.pack("<Q", n_cov)
        for i in range(n_cov):
            blob += struct.pack("<d", float(model.epsilons[i]))
            blob += _f64_bytes(model.covariances[i])
            blob += _f64_bytes(model.precisions[i])
    else:
        raise ValidationError(f"cannot persist object of type {type(model).__name__}")
    Path(path).write_bytes(bytes(blob))


class _Cursor:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, size: int, what: str) -> bytes:
        if self.pos + size > len(self.buf):
            raise FileFormatError(f"{self.path}: truncated model file while reading {what}")
        out = self.buf[self.pos : self.pos + size]
        self.pos += size
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def f64(self, count: int, shape, what: str) -> np.ndarray:
        raw = self.take(8 * count, what)
        return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()


def load_model(path):
    """Read an OODM file back into the corresponding fitted model."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise FileFormatError(f"{path}: bad magic {raw[:4]!r} (expected {MAGIC!r})")
    cur = _Cursor(raw, path)
    cur.take(4, "magic")
    version, detector = cur.unpack("<HH", "header")
    if version != VERSION:
        raise FileFormatError(f"{path}: unsupported OODM version {version}")

    if detector == _DET_LOF:
        k, metric_code, mode_code, n_classes = cur.unpack("<QBBQ", "LOF config")
        if metric_code not in _METRIC_NAME or mode_code not in _MODE_NAME:
            raise FileFormatError(f"{path}: unknown metric/mode codes {metric_code}/{mode_code}")
        config = LofConfig(k=int(k), metric=_METRIC_NAME[metric_code], mode=_MODE_NAME[mode_code])
        blocks = {}
        for _ in range(n_classes):
            cid, n, d = cur.unpack("<qQQ", "class header")
            blocks[int(cid)] = LofClassBlock(
                refs=cur.f64(n * d, (n, d), "references"),
                k_distance=cur.f64(n, (n,), "k-distances"),
                lrd=cur.f64(n, (n,), "LRDs"),
                centroid=cur.f64(d, (d,), "centroid"),
            )
        return LofModel(config=config, blocks=blocks)

    if detector == _DET_MAHALANOBIS:
        shared, n_classes, d = cur.unpack("<BQQ", "Mahalanobis header")
        class_ids = tuple(
            int(c) for c in np.frombuffer(cur.take(8 * n_classes, "class ids"), dtype="<i8")
        )
        means = cur.f64(n_classes * d, (n_classes, d), "means")
        (n_cov,) = cur.unpack("<Q", "covariance count")
        epsilons, covs, precs = [], [], []
        for _ in range(n_cov):
            (eps,) = cur.unpack("<d", "epsilon")
            epsilons.append(eps)
            covs.append(cur.f64(d * d, (d, d), "covariance"))
            precs.append(cur.f64(d * d, (d, d), "precision"))
        return MahalanobisModel(
            class_ids=class_ids,
            means=means,
            covariances=np.stack(covs),
            precisions=np.stack(precs),
            epsilons=np.array(epsilons),
            shared_covariance=bool(shared),
        )

    raise FileFormatError(f"{path}: unknown detector code {detector}")
