"""Input validation helpers used across the public API."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError


def as_samples(w, *, name="y") -> np.ndarray:
    """Return the samples of a :class:`Waveform` or array-like as a 1-D float64 array."""
    samples = getattr(w, "samples", w)
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return arr


def check_same_length(a: np.ndarray, b: np.ndarray, names=("y_hat", "y")) -> None:
    if a.shape != b.shape:
        raise DimensionError(
            f"{names[0]} and {names[1]} differ in length: {a.shape[0]} != {b.shape[0]}"
        )


def check_same_shape(a: np.ndarray, b: np.ndarray, names=("a", "b")) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{names[0]} shape {a.shape} != {names[1]} shape {b.shape}")


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
