"""Dense float64 helpers, the logistic activation, and seeded random numbers.

Conventions used by the whole package:

* matrices are two-dimensional, C-contiguous float64 arrays,
* batches put samples in rows,
* randomness always flows through a generator from ``make_rng``; the
  PCG64 stream is identical for a given seed on every platform.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyInputError, ParameterError, ShapeError

_SEED_MAX = 2**64 - 1

# One ulp inside the open interval (0, 1). The logistic function saturates
# to exactly 0.0 or 1.0 in float64 for |z| beyond ~37/745, which would break
# the strict feature-range contract, so outputs are clipped here.
_SIGMOID_LO = np.nextafter(0.0, 1.0)
_SIGMOID_HI = np.nextafter(1.0, 0.0)


def as_matrix(values) -> np.ndarray:
    """Coerce ``values`` to a 2-D C-contiguous float64 array."""
    m = np.ascontiguousarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got {m.ndim} dimension(s)")
    return m


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator: same seed, same stream, any platform."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= int(seed) <= _SEED_MAX:
        raise ParameterError(f"seed must fit in an unsigned 64-bit value, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def sigmoid(z) -> np.ndarray:
    """Elementwise 1/(1 + exp(-z)), clipped strictly inside (0, 1)."""
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-z))
    return np.clip(out, _SIGMOID_LO, _SIGMOID_HI)


def frobenius_sq(m) -> float:
    """Sum of squared entries."""
    m = as_matrix(m)
    return float(np.sum(np.square(m)))


def column_mean(m) -> np.ndarray:
    """Per-column arithmetic mean as a 1 x cols matrix."""
    m = as_matrix(m)
    if m.shape[0] == 0:
        raise EmptyInputError("column_mean needs at least one row")
    return m.mean(axis=0, keepdims=True)


def rand_matrix(rng: np.random.Generator, rows: int, cols: int, scale: float) -> np.ndarray:
    """Matrix with entries drawn uniformly from [-scale, +scale]."""
    if rows < 1 or cols < 1:
        raise ParameterError(f"matrix dimensions must be positive, got {rows}x{cols}")
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale}")
    return rng.uniform(-scale, scale, size=(rows, cols))
