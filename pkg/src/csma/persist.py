"""Versioned binary model container.

Layout, all integers little-endian:

    magic           4 bytes   b"CSMA"
    version         u16       currently 1
    layer_count     u32
    per layer       u32 input_dim, u32 hidden_dim
    per layer       f64 lambda
    per layer       w_enc then w_dec entries, f64 row-major

followed by an optional classifier section:

    tag             4 bytes   b"CLSF"
    dims            u32 feature_dim, u32 hidden1, u32 hidden2
    threshold       f64
    weights         hidden1, hidden2, output entries, f64 row-major

Round-trips are bitwise exact; training logs are not persisted.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .autoencoder import CsmaModel, LayerWeights
from .classifier import ClassifierModel
from .errors import FormatError
from .fileio import atomic_write_bytes

MAGIC = b"CSMA"
CLASSIFIER_TAG = b"CLSF"
FORMAT_VERSION = 1


def _matrix_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_model(path, model: CsmaModel, classifier: ClassifierModel | None = None) -> None:
    """Serialize the encoder stack and optional classifier atomically."""
    parts = [MAGIC, struct.pack("<H", FORMAT_VERSION), struct.pack("<I", len(model.layers))]
    for layer in model.layers:
        parts.append(struct.pack("<II", layer.input_dim, layer.hidden_dim))
    for lam in model.lambdas:
        parts.append(struct.pack("<d", lam))
    for layer in model.layers:
        parts.append(_matrix_bytes(layer.w_enc))
        parts.append(_matrix_bytes(layer.w_dec))
    if classifier is not None:
        parts.append(CLASSIFIER_TAG)
        parts.append(struct.pack(
            "<III", classifier.feature_dim,
            classifier.hidden1.shape[0], classifier.hidden2.shape[0],
        ))
        parts.append(struct.pack("<d", classifier.threshold))
        parts.append(_matrix_bytes(classifier.hidden1))
        parts.append(_matrix_bytes(classifier.hidden2))
        parts.append(_matrix_bytes(classifier.output))
    atomic_write_bytes(path, b"".join(parts))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise FormatError(f"{self.path}: truncated model file")
        values = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return values

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        size = rows * cols * 8
        if self.offset + size > len(self.data):
            raise FormatError(f"{self.path}: truncated model file")
        flat = np.frombuffer(self.data, dtype="<f8", count=rows * cols, offset=self.offset)
        self.offset += size
        return np.ascontiguousarray(flat.reshape(rows, cols), dtype=np.float64)

    @property
    def exhausted(self) -> bool:
        return self.offset == len(self.data)


def load_model(path) -> tuple[CsmaModel, ClassifierModel | None]:
    """Read a model container; returns (model, classifier or None)."""
    data = Path(path).read_bytes()
    r = _Reader(data, path)

    magic = bytes(r.take("<4s")[0])
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    (version,) = r.take("<H")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    (layer_count,) = r.take("<I")

    dims = [r.take("<II") for _ in range(layer_count)]
    lambdas = [r.take("<d")[0] for _ in range(layer_count)]
    layers = []
    for input_dim, hidden_dim in dims:
        w_enc = r.matrix(hidden_dim, input_dim)
        w_dec = r.matrix(input_dim, hidden_dim)
        layers.append(LayerWeights(w_enc, w_dec))
    model = CsmaModel(layers=layers, lambdas=lambdas)

    classifier = None
    if not r.exhausted:
        tag = bytes(r.take("<4s")[0])
        if tag != CLASSIFIER_TAG:
            raise FormatError(f"{path}: unknown section tag {tag!r}")
        feature_dim, h1, h2 = r.take("<III")
        (threshold,) = r.take("<d")
        hidden1 = r.matrix(h1, feature_dim)
        hidden2 = r.matrix(h2, h1)
        output = r.matrix(1, h2)
        classifier = ClassifierModel(hidden1, hidden2, output, threshold=threshold)

    if not r.exhausted:
        raise FormatError(f"{path}: {len(data) - r.offset} trailing byte(s)")
    return model, classifier
