"""Feed-forward classifier head trained on frozen autoencoder features.

Two sigmoid hidden layers (default sizes feature_dim/4 and /8, floored,
minimum 1) and a single sigmoid output unit, trained per sample with
gradient descent on binary cross-entropy. No bias terms, matching the
autoencoder layers. Features are never fine-tuned here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autoencoder import TrainConfig
from .errors import (
    ConsistencyError,
    DegenerateLabelsError,
    ParameterError,
    ShapeError,
    ValidationError,
)
from .linalg import as_matrix, make_rng, rand_matrix, sigmoid


def head_dims(feature_dim: int) -> tuple[int, int]:
    """Default hidden sizes: floor(m/4) and floor(m/8), at least 1 each."""
    return max(1, feature_dim // 4), max(1, feature_dim // 8)


@dataclass
class ClassifierModel:
    """Weights hidden1 (h1 x m), hidden2 (h2 x h1), output (1 x h2)."""

    hidden1: np.ndarray
    hidden2: np.ndarray
    output: np.ndarray
    threshold: float = 0.5
    training_log: list[float] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.hidden1 = as_matrix(self.hidden1)
        self.hidden2 = as_matrix(self.hidden2)
        self.output = as_matrix(self.output)
        if self.hidden2.shape[1] != self.hidden1.shape[0]:
            raise ShapeError(
                f"hidden2 {self.hidden2.shape} does not consume hidden1 "
                f"output of size {self.hidden1.shape[0]}"
            )
        if self.output.shape != (1, self.hidden2.shape[0]):
            raise ShapeError(
                f"output must be 1 x {self.hidden2.shape[0]}, got {self.output.shape}"
            )
        if not 0 < self.threshold < 1:
            raise ParameterError(f"threshold must lie in (0,1), got {self.threshold}")

    @property
    def feature_dim(self) -> int:
        return self.hidden1.shape[1]


def _forward(w1, w2, w3, x):
    f1 = sigmoid(x @ w1.T)
    f2 = sigmoid(f1 @ w2.T)
    s = sigmoid(f2 @ w3.T)
    return f1, f2, s


def predict_score(model: ClassifierModel, features) -> np.ndarray:
    """Per-row score in (0,1); the decision is adult iff score >= threshold."""
    features = as_matrix(features)
    if features.shape[1] != model.feature_dim:
        raise ShapeError(
            f"classifier expects {model.feature_dim} features, got {features.shape[1]}"
        )
    _f1, _f2, s = _forward(model.hidden1, model.hidden2, model.output, features)
    return s.ravel()


def predict_labels(model: ClassifierModel, features) -> np.ndarray:
    return (predict_score(model, features) >= model.threshold).astype(np.int64)


def _check_training_labels(features: np.ndarray, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or len(labels) != features.shape[0]:
        raise ConsistencyError(
            f"{features.shape[0]} feature rows but {labels.size} labels"
        )
    if not np.isin(labels, (0, 1)).all():
        bad = labels[~np.isin(labels, (0, 1))][0]
        raise ValidationError(f"labels must be 0 or 1, got {bad}")
    if not ((labels == 0).any() and (labels == 1).any()):
        raise DegenerateLabelsError("training labels contain only one class")
    return labels


def classifier_loss(model: ClassifierModel, features, labels) -> float:
    """Binary cross-entropy summed over the batch."""
    features = as_matrix(features)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    _f1, _f2, s = _forward(model.hidden1, model.hidden2, model.output, features)
    return float(-np.sum(labels * np.log(s) + (1.0 - labels) * np.log1p(-s)))


def _bce_grads(w1, w2, w3, x, y):
    # Gradients of summed binary cross-entropy; d(loss)/d(output logit) = s - y.
    f1, f2, s = _forward(w1, w2, w3, x)
    d3 = s - y
    g3 = d3.T @ f2
    df2 = d3 @ w3
    dz2 = (df2 * f2) * (1.0 - f2)
    g2 = dz2.T @ f1
    df1 = dz2 @ w2
    dz1 = (df1 * f1) * (1.0 - f1)
    g1 = dz1.T @ x
    return g1, g2, g3


def classifier_gradients(model: ClassifierModel, features, labels):
    """Exact gradients of classifier_loss for (hidden1, hidden2, output)."""
    features = as_matrix(features)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    return _bce_grads(model.hidden1, model.hidden2, model.output, features, labels)


def train_classifier(features, labels, cfg: TrainConfig,
                     dims: tuple[int, int] | None = None) -> ClassifierModel:
    """Per-sample SGD on binary cross-entropy; cfg.lam is ignored.

    dims overrides the (m/4, m/8) hidden sizes. Random draws: hidden1,
    hidden2, output inits, then one full-row permutation per epoch when
    shuffle is on. Deterministic for a given seed and row order.
    """
    features = as_matrix(features)
    labels = _check_training_labels(features, labels)
    m = features.shape[1]
    h1, h2 = dims if dims is not None else head_dims(m)
    if h1 < 1 or h2 < 1:
        raise ParameterError(f"hidden sizes must be positive, got {(h1, h2)}")

    rng = make_rng(cfg.seed)

    def init(rows, cols):
        if cfg.init_scale is not None:
            r = cfg.init_scale
        else:
            r = math.sqrt(6.0 / (rows + cols))
        return rand_matrix(rng, rows, cols, r)

    w1, w2, w3 = init(h1, m), init(h2, h1), init(1, h2)
    lr = cfg.learning_rate
    y_col = labels.astype(np.float64).reshape(-1, 1)

    log = []
    for _epoch in range(cfg.epochs):
        order = rng.permutation(len(labels)) if cfg.shuffle else range(len(labels))
        for i in order:
            g1, g2, g3 = _bce_grads(w1, w2, w3, features[i:i + 1], y_col[i:i + 1])
            w1 -= lr * g1
            w2 -= lr * g2
            w3 -= lr * g3
        _f1, _f2, s = _forward(w1, w2, w3, features)
        log.append(float(-np.sum(y_col * np.log(s) + (1.0 - y_col) * np.log1p(-s))))

    return ClassifierModel(w1, w2, w3, training_log=log)
