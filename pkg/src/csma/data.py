"""Datasets: IDX/CSV ingestion, the balanced split protocol, a synthetic
two-class generator, and the test-time perturbation suite.

Pixels always live in [0,1]; labels are 0 (minor) or 1 (adult). The
balanced split takes floor(fraction * smaller_class_size) samples from
each class for training and leaves everything else as test data.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import struct
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    ConsistencyError,
    EmptyClassError,
    FormatError,
    InsufficientDataError,
    MissingShapeError,
    ParameterError,
    ShapeError,
    ValidationError,
)
from .linalg import as_matrix, make_rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

PERTURBATION_KINDS = ("blur", "gaussian_noise", "holes")


@dataclass
class LabeledDataset:
    """Sample matrix (rows are flattened images in [0,1]) plus labels."""

    samples: np.ndarray
    labels: np.ndarray
    image_shape: tuple[int, int] | None = None

    def __post_init__(self):
        self.samples = as_matrix(self.samples)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise ShapeError(f"labels must be one-dimensional, got {self.labels.ndim}")
        if len(self.labels) != self.samples.shape[0]:
            raise ConsistencyError(
                f"{self.samples.shape[0]} sample rows but {len(self.labels)} labels"
            )
        bad_labels = ~np.isin(self.labels, (0, 1))
        if bad_labels.any():
            row = int(np.flatnonzero(bad_labels)[0])
            raise ValidationError(
                f"labels must be 0 or 1; row {row} has {self.labels[row]}"
            )
        if self.samples.size:
            out = (self.samples < 0.0) | (self.samples > 1.0)
            if out.any():
                row = int(np.argwhere(out)[0][0])
                raise ValidationError(f"pixel outside [0,1] at data row {row}")
        if self.image_shape is not None:
            h, w = (int(v) for v in self.image_shape)
            if h < 1 or w < 1 or h * w != self.samples.shape[1]:
                raise ConsistencyError(
                    f"image shape {h}x{w} does not cover {self.samples.shape[1]} pixels"
                )
            self.image_shape = (h, w)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def class_matrices(ds: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    """Rows of class 0 (minor) and class 1 (adult), original order kept."""
    return ds.samples[ds.labels == 0], ds.samples[ds.labels == 1]


def with_image_shape(ds: LabeledDataset, image_shape) -> LabeledDataset:
    return replace(ds, image_shape=tuple(image_shape))


def dataset_fingerprint(ds: LabeledDataset) -> str:
    """64-bit content hash: first 8 bytes of SHA-256 over dims, shape,
    sample bytes (little-endian f64 row-major), and label bytes."""
    h = hashlib.sha256()
    h.update(struct.pack("<QQ", ds.n_samples, ds.dim))
    shape = ds.image_shape if ds.image_shape is not None else (0, 0)
    h.update(struct.pack("<QQ", *shape))
    h.update(np.ascontiguousarray(ds.samples, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(ds.labels, dtype="<i8").tobytes())
    return "sha256-64:" + h.digest()[:8].hex()


def load_idx(images_path, labels_path, binarize_rule) -> LabeledDataset:
    """Read big-endian IDX image/label files; pixels scaled to [0,1] by /255.

    binarize_rule maps each raw label (for digits, 0..9) to class 0 or 1.
    """
    raw_images = Path(images_path).read_bytes()
    if len(raw_images) < 16:
        raise FormatError(f"{images_path}: truncated IDX image header")
    magic, count, height, width = struct.unpack_from(">IIII", raw_images, 0)
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(
            f"{images_path}: bad IDX image magic 0x{magic:08x}, "
            f"expected 0x{IDX_IMAGES_MAGIC:08x}"
        )
    need = 16 + count * height * width
    if len(raw_images) != need:
        raise FormatError(f"{images_path}: expected {need} bytes, found {len(raw_images)}")

    raw_labels = Path(labels_path).read_bytes()
    if len(raw_labels) < 8:
        raise FormatError(f"{labels_path}: truncated IDX label header")
    magic, label_count = struct.unpack_from(">II", raw_labels, 0)
    if magic != IDX_LABELS_MAGIC:
        raise FormatError(
            f"{labels_path}: bad IDX label magic 0x{magic:08x}, "
            f"expected 0x{IDX_LABELS_MAGIC:08x}"
        )
    if len(raw_labels) != 8 + label_count:
        raise FormatError(
            f"{labels_path}: expected {8 + label_count} bytes, found {len(raw_labels)}"
        )
    if label_count != count:
        raise ConsistencyError(f"{count} images but {label_count} labels")

    pixels = np.frombuffer(raw_images, dtype=np.uint8, offset=16)
    samples = pixels.astype(np.float64).reshape(count, height * width) / 255.0
    digits = np.frombuffer(raw_labels, dtype=np.uint8, offset=8)
    labels = np.fromiter(
        (int(binarize_rule(int(d))) for d in digits), dtype=np.int64, count=count
    )
    return LabeledDataset(samples, labels, (height, width))


def load_csv(path, label_column: str | int = "label",
             image_shape=None) -> LabeledDataset:
    """Read a rectangular numeric CSV with a header row.

    label_column names (or indexes) the {0,1} label column; every other
    column is a feature and must lie in [0,1].
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file, expected a header row")
    header = rows[0]
    width = len(header)
    if isinstance(label_column, int):
        if not 0 <= label_column < width:
            raise ParameterError(
                f"label column index {label_column} outside 0..{width - 1}"
            )
        label_idx = label_column
    else:
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise ParameterError(
                f"label column {label_column!r} not found in header {header}"
            ) from None

    n = len(rows) - 1
    samples = np.empty((n, width - 1), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64)
    for k, row in enumerate(rows[1:]):
        line = k + 2  # 1-based file line, after the header
        if len(row) != width:
            raise FormatError(f"{path}:{line}: {len(row)} fields, expected {width}")
        try:
            values = [float(v) for v in row]
        except ValueError:
            raise FormatError(f"{path}:{line}: non-numeric field") from None
        label = values.pop(label_idx)
        if label not in (0.0, 1.0):
            raise ValidationError(f"{path}:{line}: label must be 0 or 1, got {label}")
        labels[k] = int(label)
        samples[k] = values

    out = (samples < 0.0) | (samples > 1.0)
    if out.any():
        line = int(np.argwhere(out)[0][0]) + 2
        raise ValidationError(f"{path}:{line}: feature outside [0,1]")
    shape = tuple(image_shape) if image_shape is not None else None
    return LabeledDataset(samples, labels, shape)


def save_csv(ds: LabeledDataset, path, label_column: str = "label") -> None:
    """Write header + rows; floats via repr so a reload is bit-identical."""
    from .fileio import atomic_write_text

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{j}" for j in range(ds.dim)] + [label_column])
    for row, label in zip(ds.samples, ds.labels):
        writer.writerow([repr(float(v)) for v in row] + [int(label)])
    atomic_write_text(path, buf.getvalue())


def split_balanced(ds: LabeledDataset, train_fraction: float,
                   seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Training set takes k = floor(fraction * smaller_class_size) random
    samples from each class; everything else is test. Exact partition.

    The fraction is snapped to its shortest rational before the floor so
    a request like 0.70 of 3330 yields 2331 rather than tripping over
    binary float representation.
    """
    if not 0 < train_fraction < 1:
        raise ParameterError(f"train_fraction must lie in (0,1), got {train_fraction}")
    idx_minor = np.flatnonzero(ds.labels == 0)
    idx_adult = np.flatnonzero(ds.labels == 1)
    if len(idx_minor) == 0 or len(idx_adult) == 0:
        raise EmptyClassError("balanced split needs samples from both classes")
    n_small = min(len(idx_minor), len(idx_adult))
    k = math.floor(Fraction(train_fraction).limit_denominator(10**6) * n_small)
    if k == 0:
        raise InsufficientDataError(
            f"train_fraction {train_fraction} of {n_small} samples selects none"
        )

    rng = make_rng(seed)
    pick_minor = np.sort(rng.permutation(idx_minor)[:k])
    pick_adult = np.sort(rng.permutation(idx_adult)[:k])
    train_idx = np.concatenate([pick_minor, pick_adult])
    test_idx = np.setdiff1d(np.arange(ds.n_samples), train_idx)

    train = LabeledDataset(ds.samples[train_idx], ds.labels[train_idx], ds.image_shape)
    test = LabeledDataset(ds.samples[test_idx], ds.labels[test_idx], ds.image_shape)
    return train, test


def synth_two_class(n_per_class: int, dim: int, mean_separation: float,
                    noise_std: float, seed: int) -> LabeledDataset:
    """Two fixed class patterns plus clamped Gaussian pixel noise.

    The patterns sit at 0.5 +/- mean_separation/2, bright-first-half for
    one class and dark-first-half for the other, so every pixel differs
    by exactly mean_separation between the class means. A perfect-square
    dim records a square image shape, otherwise a single row.
    """
    if n_per_class < 1:
        raise ParameterError(f"n_per_class must be >= 1, got {n_per_class}")
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    if not 0 < mean_separation <= 1:
        raise ParameterError(
            f"mean_separation must lie in (0,1], got {mean_separation}"
        )
    if noise_std < 0:
        raise ParameterError(f"noise_std must be >= 0, got {noise_std}")

    sign = np.ones(dim)
    sign[dim // 2:] = -1.0
    mu0 = 0.5 - sign * (mean_separation / 2.0)
    mu1 = 0.5 + sign * (mean_separation / 2.0)

    rng = make_rng(seed)
    class0 = np.clip(mu0 + rng.normal(0.0, noise_std, (n_per_class, dim)), 0.0, 1.0)
    class1 = np.clip(mu1 + rng.normal(0.0, noise_std, (n_per_class, dim)), 0.0, 1.0)
    samples = np.vstack([class0, class1])
    labels = np.concatenate([np.zeros(n_per_class, np.int64), np.ones(n_per_class, np.int64)])

    side = math.isqrt(dim)
    shape = (side, side) if side * side == dim else (1, dim)
    return LabeledDataset(samples, labels, shape)


@dataclass
class PerturbationSpec:
    """Exactly the parameters of the chosen kind may be set.

    blur: sigma. gaussian_noise: mean, std_dev, seed. holes: hole_count,
    hole_size, seed.
    """

    kind: str
    sigma: float | None = None
    mean: float | None = None
    std_dev: float | None = None
    hole_count: int | None = None
    hole_size: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ParameterError(
                f"unknown perturbation kind {self.kind!r}; expected one of "
                f"{', '.join(PERTURBATION_KINDS)}"
            )
        wanted = {
            "blur": ("sigma",),
            "gaussian_noise": ("mean", "std_dev", "seed"),
            "holes": ("hole_count", "hole_size", "seed"),
        }[self.kind]
        all_params = ("sigma", "mean", "std_dev", "hole_count", "hole_size", "seed")
        for name in all_params:
            value = getattr(self, name)
            if name in wanted and value is None:
                raise ParameterError(f"{self.kind} perturbation requires {name}")
            if name not in wanted and value is not None:
                raise ParameterError(f"{self.kind} perturbation does not take {name}")
        if self.kind == "blur" and not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if self.kind == "gaussian_noise" and self.std_dev < 0:
            raise ParameterError(f"std_dev must be >= 0, got {self.std_dev}")
        if self.kind == "holes" and (self.hole_count < 1 or self.hole_size < 1):
            raise ParameterError(
                f"hole_count and hole_size must be >= 1, got "
                f"{self.hole_count} and {self.hole_size}"
            )


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps over radius ceil(3*sigma), summing to exactly 1.0.

    The center tap absorbs the normalization residue so convolution with
    a constant image returns that constant to accumulation precision.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3 * sigma)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    k /= k.sum()
    for _ in range(4):  # fold the rounding residue into the center tap
        residue = 1.0 - k.sum()
        if residue == 0.0:
            break
        k[radius] += residue
    return k


def _reflect_indices(n: int, radius: int) -> np.ndarray:
    # Mirror with edge repeat, tiling for any radius:
    # ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
    idx = np.arange(-radius, n + radius)
    period = 2 * n
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - 1 - idx, idx)


def _convolve_axis(stack: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    # Centered form: tap differences against the window center vanish on a
    # constant signal, so flat regions come back bit-identical no matter
    # how the dot product accumulates.
    radius = len(kernel) // 2
    idx = _reflect_indices(stack.shape[axis], radius)
    padded = np.take(stack, idx, axis=axis)
    windows = sliding_window_view(padded, len(kernel), axis=axis)
    center = windows[..., radius]
    return center + (windows - center[..., None]) @ kernel


def _blur(ds: LabeledDataset, sigma: float) -> np.ndarray:
    height, width = ds.image_shape
    images = ds.samples.reshape(ds.n_samples, height, width)
    kernel = gaussian_kernel(sigma)
    out = np.empty_like(images)
    # Window views blow the array up by the tap count; bound the peak.
    step = max(1, 2**22 // (height * width * len(kernel)))
    for lo in range(0, ds.n_samples, step):
        block = images[lo:lo + step]
        out[lo:lo + step] = _convolve_axis(
            _convolve_axis(block, kernel, axis=1), kernel, axis=2
        )
    # Weighted averages of [0,1] values can stray an ulp past the ends.
    return np.clip(out, 0.0, 1.0).reshape(ds.n_samples, height * width)


def _holes(ds: LabeledDataset, count: int, size: int, seed: int) -> np.ndarray:
    height, width = ds.image_shape
    images = ds.samples.reshape(ds.n_samples, height, width).copy()
    rng = make_rng(seed)
    # Per image: one draw of corner rows, one of corner columns. Corners
    # range over the whole image; blocks clip at the borders.
    for img in images:
        rows = rng.integers(0, height, size=count)
        cols = rng.integers(0, width, size=count)
        for r, c in zip(rows, cols):
            img[r:r + size, c:c + size] = 0.0
    return images.reshape(ds.n_samples, height * width)


def perturb(ds: LabeledDataset, spec: PerturbationSpec) -> LabeledDataset:
    """Perturbed copy of the dataset; labels untouched."""
    if spec.kind == "gaussian_noise":
        rng = make_rng(spec.seed)
        noise = rng.normal(spec.mean, spec.std_dev, ds.samples.shape)
        samples = np.clip(ds.samples + noise, 0.0, 1.0)
    else:
        if ds.image_shape is None:
            raise MissingShapeError(
                f"{spec.kind} needs an image shape but the dataset has none"
            )
        if spec.kind == "blur":
            samples = _blur(ds, spec.sigma)
        else:
            samples = _holes(ds, spec.hole_count, spec.hole_size, spec.seed)
    return LabeledDataset(samples, ds.labels.copy(), ds.image_shape)
