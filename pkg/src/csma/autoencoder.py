"""Class-specific mean autoencoder: losses, gradients, and trainers.

One layer holds an encoder matrix (hidden x input) and a decoder matrix
(input x hidden); there are no bias terms. Hidden features are sigmoid
outputs, reconstruction is linear. The class-specific loss adds a pull
term lam * ||f - mean_c||^2 that draws each sample's hidden feature
toward its class's mean feature.

Training is per-sample gradient descent. Each epoch first recomputes
both class mean features from the current weights, then sweeps all
class-0 (minor) samples and then all class-1 (adult) samples, taking
one descent step per sample against that class's frozen mean. Means
never receive gradient; they are constants within an epoch.

Stacking is greedy: each layer trains to completion on the previous
layer's encodings, and only encoders are kept for feature extraction.

Random draws (all from one PCG64 stream per run): encoder init, decoder
init, then per epoch one permutation per class block when shuffle is
on; the denoising trainer additionally draws one corruption mask per
sample presentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConsistencyError,
    DivergenceError,
    EmptyClassError,
    ParameterError,
    ShapeError,
)
from .linalg import as_matrix, column_mean, make_rng, rand_matrix, sigmoid

_SEED_SPACE = 2**64


@dataclass
class TrainConfig:
    """Knobs for per-sample gradient-descent training.

    lam is the strength of the class-mean pull term; it is ignored by
    trainers that have no class structure (plain, denoising, classifier).
    init_scale None means the fan-based default sqrt(6/(fan_in+fan_out)).
    shuffle permutes sample order within each class block only.
    """

    epochs: int = 100
    learning_rate: float = 0.01
    lam: float = 0.1
    seed: int = 0
    init_scale: float | None = None
    shuffle: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ParameterError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.lam < 0:
            raise ParameterError(f"lam must be >= 0, got {self.lam}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) \
                or not 0 <= self.seed < _SEED_SPACE:
            raise ParameterError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        if self.init_scale is not None and not self.init_scale > 0:
            raise ParameterError(f"init_scale must be positive, got {self.init_scale}")


@dataclass
class LayerWeights:
    """One layer's weights: w_enc is hidden x input, w_dec is input x hidden."""

    w_enc: np.ndarray
    w_dec: np.ndarray

    def __post_init__(self):
        self.w_enc = as_matrix(self.w_enc)
        self.w_dec = as_matrix(self.w_dec)
        if self.w_enc.shape != self.w_dec.shape[::-1]:
            raise ShapeError(
                f"encoder {self.w_enc.shape} and decoder {self.w_dec.shape} "
                "are not transposed shapes of each other"
            )

    @property
    def input_dim(self) -> int:
        return self.w_enc.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_enc.shape[0]


@dataclass
class ClassMeans:
    """Mean hidden feature per class, each a 1 x hidden matrix."""

    minor: np.ndarray
    adult: np.ndarray

    def __post_init__(self):
        self.minor = as_matrix(self.minor)
        self.adult = as_matrix(self.adult)
        if self.minor.shape != self.adult.shape or self.minor.shape[0] != 1:
            raise ShapeError(
                f"class means must both be 1 x hidden, got {self.minor.shape} "
                f"and {self.adult.shape}"
            )


@dataclass
class CsmaModel:
    """Trained encoder stack with its per-layer pull strengths and loss log."""

    layers: list[LayerWeights]
    lambdas: list[float]
    training_log: list[list[float]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.lambdas) != len(self.layers):
            raise ConsistencyError(
                f"{len(self.layers)} layer(s) but {len(self.lambdas)} lambda value(s)"
            )
        for lam in self.lambdas:
            if lam < 0:
                raise ParameterError(f"lambda values must be >= 0, got {lam}")
        for i in range(1, len(self.layers)):
            prev, cur = self.layers[i - 1], self.layers[i]
            if cur.input_dim != prev.hidden_dim:
                raise ShapeError(
                    f"layer {i} expects input dim {cur.input_dim} but layer "
                    f"{i - 1} produces {prev.hidden_dim}"
                )

    @property
    def layer_dims(self) -> list[int]:
        return [layer.hidden_dim for layer in self.layers]

    @property
    def input_dim(self) -> int | None:
        return self.layers[0].input_dim if self.layers else None


def _check_cols(x: np.ndarray, expected: int, what: str) -> None:
    if x.shape[1] != expected:
        raise ShapeError(f"{what}: expected {expected} columns, got {x.shape[1]}")


def encode(w: LayerWeights, x) -> np.ndarray:
    """Hidden features sigmoid(x @ w_enc.T), one row per sample."""
    x = as_matrix(x)
    _check_cols(x, w.input_dim, "encode")
    return sigmoid(x @ w.w_enc.T)


def decode(w: LayerWeights, f) -> np.ndarray:
    """Linear reconstruction f @ w_dec.T (no output activation)."""
    f = as_matrix(f)
    _check_cols(f, w.hidden_dim, "decode")
    return f @ w.w_dec.T


def class_mean(w: LayerWeights, samples_of_class) -> np.ndarray:
    """Mean hidden feature of one class as a 1 x hidden matrix."""
    samples_of_class = as_matrix(samples_of_class)
    if samples_of_class.shape[0] == 0:
        raise EmptyClassError("cannot take a class mean over zero samples")
    return column_mean(encode(w, samples_of_class))


def ae_loss(w: LayerWeights, x) -> float:
    """Squared reconstruction error summed over the batch."""
    x = as_matrix(x)
    d = decode(w, encode(w, x)) - x
    return float(np.sum(d * d))


def _as_mean_row(mean_c, hidden_dim: int) -> np.ndarray:
    mean_c = np.asarray(mean_c, dtype=np.float64)
    if mean_c.ndim == 1:
        mean_c = mean_c.reshape(1, -1)
    mean_c = as_matrix(mean_c)
    if mean_c.shape != (1, hidden_dim):
        raise ShapeError(f"class mean must be 1 x {hidden_dim}, got {mean_c.shape}")
    return mean_c


def csma_loss(w: LayerWeights, x_c, mean_c, lam: float) -> float:
    """Reconstruction error plus lam times squared distance to the class mean.

    With lam = 0 this equals ae_loss on the same inputs bit for bit.
    """
    if lam < 0:
        raise ParameterError(f"lam must be >= 0, got {lam}")
    x_c = as_matrix(x_c)
    _check_cols(x_c, w.input_dim, "csma_loss")
    mean_c = _as_mean_row(mean_c, w.hidden_dim)
    f = encode(w, x_c)
    d = decode(w, f) - x_c
    g = f - mean_c
    return float(np.sum(d * d) + lam * np.sum(g * g))


def _recon_grads(w_enc, w_dec, x_in, x_target, mean, lam):
    # Shared gradient kernel for every trainer and the public gradient
    # ops: loss ||x_target - w_dec f||^2 + lam ||f - mean||^2 with
    # f = sigmoid(x_in @ w_enc.T). mean is a constant, never backpropagated.
    f = sigmoid(x_in @ w_enc.T)
    r = f @ w_dec.T
    e = 2.0 * (r - x_target)
    g_dec = e.T @ f
    df = e @ w_dec
    if lam != 0.0:
        df = df + (2.0 * lam) * (f - mean)
    dz = (df * f) * (1.0 - f)
    g_enc = dz.T @ x_in
    return g_enc, g_dec


def ae_gradients(w: LayerWeights, x) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradients of ae_loss with respect to (w_enc, w_dec)."""
    x = as_matrix(x)
    _check_cols(x, w.input_dim, "ae_gradients")
    return _recon_grads(w.w_enc, w.w_dec, x, x, None, 0.0)


def csma_gradients(w: LayerWeights, x_c, mean_c, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradients of csma_loss, holding the class mean fixed."""
    if lam < 0:
        raise ParameterError(f"lam must be >= 0, got {lam}")
    x_c = as_matrix(x_c)
    _check_cols(x_c, w.input_dim, "csma_gradients")
    mean_c = _as_mean_row(mean_c, w.hidden_dim)
    return _recon_grads(w.w_enc, w.w_dec, x_c, x_c, mean_c, lam)


def init_layer(rng: np.random.Generator, input_dim: int, hidden_dim: int,
               init_scale: float | None) -> LayerWeights:
    """Fresh layer with entries uniform in [-r, r]; draws encoder then decoder."""
    if input_dim < 1 or hidden_dim < 1:
        raise ParameterError(
            f"layer dims must be positive, got input {input_dim}, hidden {hidden_dim}"
        )
    r = init_scale if init_scale is not None else math.sqrt(6.0 / (input_dim + hidden_dim))
    return LayerWeights(
        w_enc=rand_matrix(rng, hidden_dim, input_dim, r),
        w_dec=rand_matrix(rng, input_dim, hidden_dim, r),
    )


def _guard(loss: float, limit: float, epoch: int) -> None:
    if not math.isfinite(loss):
        raise DivergenceError(f"training diverged at epoch {epoch}: loss is {loss!r}", epoch)
    if loss > limit:
        raise DivergenceError(
            f"training diverged at epoch {epoch}: loss {loss:.6g} exceeds "
            f"10x the initial loss", epoch
        )


def _sweep_order(rng, n: int, shuffle: bool):
    return rng.permutation(n) if shuffle else range(n)


def _train_layer(x_minor, x_adult, cfg, hidden_dim, observer):
    x_minor = as_matrix(x_minor)
    x_adult = as_matrix(x_adult)
    if x_minor.shape[0] == 0:
        raise EmptyClassError("no minor (class 0) samples to train on")
    if x_adult.shape[0] == 0:
        raise EmptyClassError("no adult (class 1) samples to train on")
    if x_minor.shape[1] != x_adult.shape[1]:
        raise ShapeError(
            f"class sample widths differ: {x_minor.shape[1]} vs {x_adult.shape[1]}"
        )
    input_dim = x_minor.shape[1]
    hidden = input_dim if hidden_dim is None else int(hidden_dim)

    rng = make_rng(cfg.seed)
    w = init_layer(rng, input_dim, hidden, cfg.init_scale)
    lam, lr = cfg.lam, cfg.learning_rate

    mean_minor = class_mean(w, x_minor)
    mean_adult = class_mean(w, x_adult)
    initial = (csma_loss(w, x_minor, mean_minor, lam)
               + csma_loss(w, x_adult, mean_adult, lam))
    limit = 10.0 * max(initial, 1e-12)

    log = []
    for epoch in range(cfg.epochs):
        # Means are frozen for the whole epoch; recomputed only here.
        mean_minor = class_mean(w, x_minor)
        mean_adult = class_mean(w, x_adult)
        if observer is not None:
            observer("epoch_start", epoch=epoch,
                     means=ClassMeans(mean_minor.copy(), mean_adult.copy()))
        for block, mean, label in ((x_minor, mean_minor, 0), (x_adult, mean_adult, 1)):
            for i in _sweep_order(rng, block.shape[0], cfg.shuffle):
                row = block[i:i + 1]
                if observer is not None:
                    observer("step", epoch=epoch, label=label, index=int(i),
                             means=ClassMeans(mean_minor.copy(), mean_adult.copy()))
                g_enc, g_dec = _recon_grads(w.w_enc, w.w_dec, row, row, mean, lam)
                w.w_enc -= lr * g_enc
                w.w_dec -= lr * g_dec
        loss = (csma_loss(w, x_minor, mean_minor, lam)
                + csma_loss(w, x_adult, mean_adult, lam))
        log.append(loss)
        if observer is not None:
            observer("epoch_end", epoch=epoch, loss=loss)
        _guard(loss, limit, epoch)

    final_means = ClassMeans(class_mean(w, x_minor), class_mean(w, x_adult))
    return w, final_means, log


def train_single_layer(x_minor, x_adult, cfg: TrainConfig, hidden_dim: int | None = None,
                       observer=None) -> tuple[LayerWeights, ClassMeans]:
    """Train one layer with per-epoch class means; returns weights and final means.

    hidden_dim defaults to the input dimension. The optional observer is
    called as observer(event, **info) with events "epoch_start" (fresh
    means), "step" (per-sample, with the means in force), and
    "epoch_end" (total loss for the epoch).
    """
    w, means, _log = _train_layer(x_minor, x_adult, cfg, hidden_dim, observer)
    return w, means


def _layer_configs(cfg, n_layers: int) -> list[TrainConfig]:
    if isinstance(cfg, TrainConfig):
        return [replace(cfg, seed=(cfg.seed + i) % _SEED_SPACE) for i in range(n_layers)]
    cfgs = list(cfg)
    if len(cfgs) != n_layers:
        raise ConsistencyError(f"{n_layers} layer(s) but {len(cfgs)} config(s)")
    for c in cfgs:
        if not isinstance(c, TrainConfig):
            raise ParameterError(f"expected TrainConfig entries, got {type(c).__name__}")
    return cfgs


def train_stacked(x_minor, x_adult, layer_dims, cfg, observer=None) -> CsmaModel:
    """Greedy layer-by-layer training; layer i+1 trains on layer i's encodings.

    cfg is one TrainConfig (layer i reuses it with seed+i) or a sequence
    of per-layer configs. layer_dims[0] must equal the input dimension.
    """
    x_minor = as_matrix(x_minor)
    x_adult = as_matrix(x_adult)
    dims = [int(d) for d in layer_dims]
    if not dims:
        raise ParameterError("layer_dims must be non-empty")
    if any(d < 1 for d in dims):
        raise ParameterError(f"layer dims must be positive, got {dims}")
    if dims[0] != x_minor.shape[1]:
        raise ParameterError(
            f"first layer dim must equal the input dimension "
            f"{x_minor.shape[1]}, got {dims[0]}"
        )
    cfgs = _layer_configs(cfg, len(dims))

    layers, lambdas, logs = [], [], []
    f_minor, f_adult = x_minor, x_adult
    for i, hidden in enumerate(dims):
        layer_observer = None
        if observer is not None:
            def layer_observer(event, _layer=i, **info):
                observer(event, layer=_layer, **info)
        w, _means, log = _train_layer(f_minor, f_adult, cfgs[i], hidden, layer_observer)
        layers.append(w)
        lambdas.append(cfgs[i].lam)
        logs.append(log)
        # Only encodings feed forward; this layer's decoder is not used again.
        f_minor = encode(w, f_minor)
        f_adult = encode(w, f_adult)
    return CsmaModel(layers=layers, lambdas=lambdas, training_log=logs)


def extract_features(model: CsmaModel, x) -> np.ndarray:
    """Forward pass through every encoder in order; decoders are unused."""
    x = as_matrix(x)
    if model.layers:
        _check_cols(x, model.input_dim, "extract_features")
    f = x
    for layer in model.layers:
        f = encode(layer, f)
    return f


def corruption_mask(rng: np.random.Generator, count: int, prob: float) -> np.ndarray:
    """Float mask of length count: each entry 0.0 with probability prob, else 1.0."""
    return (rng.random(count) >= prob).astype(np.float64)


def train_plain_baseline(x_all, cfg: TrainConfig, hidden_dim: int | None = None) -> LayerWeights:
    """Plain autoencoder: per-sample SGD on reconstruction error alone.

    Sweeps rows in the given order (shuffle permutes all rows); with a
    shared seed and sweep order this is the lam = 0 trajectory of the
    class-specific trainer, bit for bit.
    """
    x_all = as_matrix(x_all)
    if x_all.shape[0] == 0:
        raise EmptyClassError("no samples to train on")
    input_dim = x_all.shape[1]
    hidden = input_dim if hidden_dim is None else int(hidden_dim)

    rng = make_rng(cfg.seed)
    w = init_layer(rng, input_dim, hidden, cfg.init_scale)
    lr = cfg.learning_rate
    limit = 10.0 * max(ae_loss(w, x_all), 1e-12)

    for epoch in range(cfg.epochs):
        for i in _sweep_order(rng, x_all.shape[0], cfg.shuffle):
            row = x_all[i:i + 1]
            g_enc, g_dec = _recon_grads(w.w_enc, w.w_dec, row, row, None, 0.0)
            w.w_enc -= lr * g_enc
            w.w_dec -= lr * g_dec
        _guard(ae_loss(w, x_all), limit, epoch)
    return w


def train_denoising_baseline(x_all, cfg: TrainConfig, corruption_prob: float,
                             hidden_dim: int | None = None) -> LayerWeights:
    """Denoising autoencoder: reconstruct clean rows from masked inputs.

    Each presentation draws a fresh mask zeroing pixels with probability
    corruption_prob; labels play no role. corruption_prob 0 draws no
    masks at all, so the trajectory equals the plain baseline's.
    """
    if not 0 <= corruption_prob < 1:
        raise ParameterError(
            f"corruption_prob must lie in [0, 1), got {corruption_prob}"
        )
    x_all = as_matrix(x_all)
    if x_all.shape[0] == 0:
        raise EmptyClassError("no samples to train on")
    input_dim = x_all.shape[1]
    hidden = input_dim if hidden_dim is None else int(hidden_dim)

    rng = make_rng(cfg.seed)
    w = init_layer(rng, input_dim, hidden, cfg.init_scale)
    lr = cfg.learning_rate
    limit = 10.0 * max(ae_loss(w, x_all), 1e-12)

    for epoch in range(cfg.epochs):
        for i in _sweep_order(rng, x_all.shape[0], cfg.shuffle):
            row = x_all[i:i + 1]
            if corruption_prob > 0:
                corrupted = row * corruption_mask(rng, input_dim, corruption_prob)
            else:
                corrupted = row
            g_enc, g_dec = _recon_grads(w.w_enc, w.w_dec, corrupted, row, None, 0.0)
            w.w_enc -= lr * g_enc
            w.w_dec -= lr * g_dec
        _guard(ae_loss(w, x_all), limit, epoch)
    return w
