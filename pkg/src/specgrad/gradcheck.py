"""Central finite-difference oracle for the analytic gradients.

Nothing here calls the analytic gradient code; the oracle only evaluates
loss functions and the forward STFT.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_samples
from .errors import DimensionError, EvaluationError
from .stft import AMPLITUDE_FLOOR, StftOperator, _fast_entries

DEFAULT_STEP = 1e-6


@dataclass(frozen=True)
class FdReport:
    max_rel_error: float
    max_abs_error: float
    worst_index: int
    num_checked: int
    num_skipped_floor: int

    def passed(self, tol: float = 1e-5) -> bool:
        return self.max_rel_error <= tol

    def summary(self) -> str:
        return (
            f"max_rel_error={self.max_rel_error:.3e} max_abs_error={self.max_abs_error:.3e} "
            f"worst_index={self.worst_index} checked={self.num_checked} skipped_floor={self.num_skipped_floor}"
        )


def fd_gradient(loss_fn, y, h: float = DEFAULT_STEP) -> np.ndarray:
    """``(f(y + h e_m) - f(y - h e_m)) / 2h`` for every coordinate ``m``."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    y = as_samples(y)
    grad = np.empty_like(y)
    probe = y.copy()
    for m in range(y.shape[0]):
        probe[m] = y[m] + h
        f_plus = float(loss_fn(probe))
        probe[m] = y[m] - h
        f_minus = float(loss_fn(probe))
        probe[m] = y[m]
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise EvaluationError(f"non-finite loss when perturbing coordinate {m}", index=m)
        grad[m] = (f_plus - f_minus) / (2.0 * h)
    return grad


def floor_crossings(op: StftOperator, y, h: float = DEFAULT_STEP, reference=None) -> np.ndarray:
    """Coordinates whose ``+-h`` perturbation moves any bin across the amplitude floor.

    If ``reference`` is given its floored bins are folded into the mask too,
    since the loss treats a bin as floored when either side is.
    """
    y = as_samples(y)
    ref_floor = np.zeros(op.shape, dtype=bool)
    if reference is not None:
        ref_floor = np.abs(_fast_entries(op, reference)) < AMPLITUDE_FLOOR

    def mask(z):
        return (np.abs(_fast_entries(op, z)) < AMPLITUDE_FLOOR) | ref_floor

    base = mask(y)
    out = np.zeros(y.shape[0], dtype=bool)
    probe = y.copy()
    for m in range(y.shape[0]):
        for sign in (1.0, -1.0):
            probe[m] = y[m] + sign * h
            if np.any(mask(probe) != base):
                out[m] = True
        probe[m] = y[m]
    return out


def check(analytic, numeric, skip=None) -> FdReport:
    """Compare gradients coordinate-wise.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-8)``; coordinates flagged in
    ``skip`` are counted but not compared.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.shape != n.shape:
        raise DimensionError(f"analytic gradient has shape {a.shape}, numeric {n.shape}")
    skip = np.zeros(a.shape, dtype=bool) if skip is None else np.asarray(skip, dtype=bool)
    keep = ~skip
    abs_err = np.abs(a - n)
    rel_err = abs_err / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    rel_err = np.where(keep, rel_err, 0.0)
    abs_err = np.where(keep, abs_err, 0.0)
    worst = int(np.argmax(rel_err)) if a.size else -1
    return FdReport(
        max_rel_error=float(rel_err.max(initial=0.0)),
        max_abs_error=float(abs_err.max(initial=0.0)),
        worst_index=worst,
        num_checked=int(keep.sum()),
        num_skipped_floor=int(skip.sum()),
    )


def check_gradient(loss_fn, grad, y, op: StftOperator | None = None, h: float = DEFAULT_STEP, reference=None) -> FdReport:
    """Run the oracle on ``loss_fn`` at ``y`` and compare it with ``grad``.

    Pass ``op`` to skip coordinates that cross the amplitude floor.
    """
    skip = floor_crossings(op, y, h, reference) if op is not None else None
    return check(grad, fd_gradient(loss_fn, y, h), skip)
