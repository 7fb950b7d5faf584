"""Amplitude and phase spectral losses, their analytic gradients, and the
equivalent Gaussian / von Mises negative log-likelihood.

Argument order throughout is ``(y_hat, y)``: ``y_hat`` is the reference
(natural) waveform and ``y`` the waveform being scored or optimized. All
gradients are taken with respect to ``y``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_samples, check_same_length, check_same_shape
from .errors import ConfigError, DimensionError
from .stft import AMPLITUDE_FLOOR, StftOperator, _fast_entries


class AlphaScheme(str, enum.Enum):
    """How the phase term is weighted per frame and bin."""

    AMPLITUDE_ONLY = "0"
    UNIFORM = "1"
    VOICED_ONLY = "vuv"


@dataclass(frozen=True)
class LossWeights:
    """Phase-term weights ``alpha[t, n]``.

    ``VOICED_ONLY`` copies the per-frame voiced flag across all bins of the
    frame, so unvoiced frames are scored on amplitude alone.
    """

    scheme: AlphaScheme = AlphaScheme.UNIFORM
    flags: object = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", AlphaScheme(self.scheme))
        if self.scheme is AlphaScheme.VOICED_ONLY and self.flags is None:
            raise ConfigError("VOICED_ONLY weights need voiced/unvoiced flags")

    @classmethod
    def amplitude_only(cls):
        return cls(AlphaScheme.AMPLITUDE_ONLY)

    @classmethod
    def uniform(cls):
        return cls(AlphaScheme.UNIFORM)

    @classmethod
    def voiced_only(cls, flags):
        return cls(AlphaScheme.VOICED_ONLY, flags)

    def realize(self, num_frames: int, num_bins: int) -> np.ndarray:
        """Return the ``(T, K)`` array of 0/1 weights."""
        if self.scheme is AlphaScheme.AMPLITUDE_ONLY:
            return np.zeros((num_frames, num_bins))
        if self.scheme is AlphaScheme.UNIFORM:
            return np.ones((num_frames, num_bins))
        v = np.asarray(getattr(self.flags, "flags", self.flags), dtype=np.float64)
        if v.shape != (num_frames,):
            raise DimensionError(f"need {num_frames} voiced/unvoiced flags, got {v.shape[0] if v.ndim else 0}")
        return np.repeat(v[:, None], num_bins, axis=1)


@dataclass(frozen=True)
class LossBreakdown:
    e_amp: float
    e_phase: float
    e_total: float
    per_frame: np.ndarray | None = None  # (T, 2): amplitude and weighted phase sums


def _alpha_for(weights, op: StftOperator) -> np.ndarray:
    if isinstance(weights, LossWeights):
        return weights.realize(*op.shape)
    alpha = np.asarray(weights, dtype=np.float64)
    if alpha.ndim == 0:
        alpha = np.full(op.shape, float(alpha))
    check_same_shape(alpha, np.empty(op.shape), ("alpha", "spectrogram"))
    return alpha


class _Target:
    """Reference-side quantities, reusable across many evaluations."""

    def __init__(self, Y_hat: np.ndarray):
        self.Y_hat = np.asarray(Y_hat, dtype=np.complex128)
        self.A_hat = np.abs(self.Y_hat)
        self.ok = self.A_hat >= AMPLITUDE_FLOOR
        self.unit = self.Y_hat / np.where(self.ok, self.A_hat, 1.0)


class _Terms:
    """Per-bin quantities shared by the losses and gradients."""

    def __init__(self, target, Y: np.ndarray):
        if not isinstance(target, _Target):
            target = _Target(target)
        self.A_hat = target.A_hat
        self.Y = Y
        self.A = np.abs(Y)
        ok = self.A >= AMPLITUDE_FLOOR
        self.ok = ok
        self.live = target.ok & ok
        self.unit = np.where(ok, Y / np.where(ok, self.A, 1.0), 0.0)
        self.unit_hat = target.unit
        # exp(i(theta_hat - theta)) on live bins, 1 elsewhere
        self.rot = np.where(self.live, target.unit * np.conj(self.unit), 1.0)

    def amp_bins(self) -> np.ndarray:
        return 0.5 * (self.A_hat - self.A) ** 2

    def phase_bins(self) -> np.ndarray:
        # 0.5 * |exp(i theta_hat) - exp(i theta)|**2, exactly 0 for identical spectra
        diff = np.where(self.live, self.unit_hat - self.unit, 0.0)
        return np.minimum(0.5 * (diff.real**2 + diff.imag**2), 2.0)

    def amp_coef(self) -> np.ndarray:
        # (A - A_hat) * exp(i theta); zero where A is floored
        return (self.A - self.A_hat) * self.unit

    def phase_coef(self) -> np.ndarray:
        # sin(d) * Im(conj(W) / conj(Y)) == Re(-1j * sin(d) / conj(Y) * conj(W))
        inv_conj = np.where(self.live, self.unit / np.where(self.live, self.A, 1.0), 0.0)
        return -1j * self.rot.imag * inv_conj


def _spectra(y_hat, y, op: StftOperator):
    y_hat = as_samples(y_hat, name="y_hat")
    y = as_samples(y, name="y")
    check_same_length(y_hat, y)
    return _fast_entries(op, y_hat), _fast_entries(op, y)


def waveform_loss(y_hat, y) -> float:
    """Sum of squared sample differences."""
    y_hat = as_samples(y_hat, name="y_hat")
    y = as_samples(y, name="y")
    check_same_length(y_hat, y)
    return float(np.sum((y_hat - y) ** 2))


def amplitude_loss(A_hat, A) -> float:
    A_hat = np.asarray(A_hat, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    check_same_shape(A_hat, A, ("A_hat", "A"))
    return float(np.sum(0.5 * (A_hat - A) ** 2))


def phase_loss(theta_hat, theta, alpha=1.0) -> float:
    """Weighted ``sum alpha * 0.5 * |1 - exp(i(theta_hat - theta))|**2``."""
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    check_same_shape(theta_hat, theta, ("theta_hat", "theta"))
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), theta.shape)
    per_bin = 0.5 * np.abs(1.0 - np.exp(1j * (theta_hat - theta))) ** 2
    return float(np.sum(alpha * per_bin))


def breakdown_from_spectra(Y_hat, Y, alpha, per_frame=False) -> LossBreakdown:
    """Combined loss from precomputed spectra.

    Phase terms on bins where either amplitude is below the floor count as 0.
    """
    terms = _Terms(np.asarray(Y_hat), np.asarray(Y))
    amp_frames = terms.amp_bins().sum(axis=1)
    ph_frames = (alpha * terms.phase_bins()).sum(axis=1)
    e_amp = float(amp_frames.sum())
    e_phase = float(ph_frames.sum())
    frames = np.stack([amp_frames, ph_frames], axis=1) if per_frame else None
    return LossBreakdown(e_amp, e_phase, float((amp_frames + ph_frames).sum()), frames)


def combined_loss(y_hat, y, op: StftOperator, weights=None, per_frame=False) -> LossBreakdown:
    weights = LossWeights() if weights is None else weights
    Y_hat, Y = _spectra(y_hat, y, op)
    return breakdown_from_spectra(Y_hat, Y, _alpha_for(weights, op), per_frame=per_frame)


def _accumulate(op: StftOperator, coef: np.ndarray, path: str) -> np.ndarray:
    if path == "fast":
        return op.accumulate_fast(coef)
    if path == "matrix":
        return op.accumulate_matrix(coef)
    raise ValueError(f"path must be 'fast' or 'matrix', got {path!r}")


def amplitude_grad(y_hat, y, op: StftOperator, path="fast") -> np.ndarray:
    """Gradient of the summed amplitude loss with respect to ``y``.

    Each bin contributes ``(A - A_hat) * Re(exp(i theta) W^H)``; bins with
    ``A`` below the floor contribute nothing.
    """
    Y_hat, Y = _spectra(y_hat, y, op)
    return _accumulate(op, _Terms(Y_hat, Y).amp_coef(), path)


def phase_grad(y_hat, y, op: StftOperator, weights=None, path="fast") -> np.ndarray:
    """Gradient of the weighted phase loss with respect to ``y``.

    Each bin contributes ``alpha * sin(theta_hat - theta) * Im(W^H / conj(Y))``.
    """
    weights = LossWeights() if weights is None else weights
    Y_hat, Y = _spectra(y_hat, y, op)
    alpha = _alpha_for(weights, op)
    return _accumulate(op, alpha * _Terms(Y_hat, Y).phase_coef(), path)


def loss_and_grad_from_spectra(Y_hat, y, op: StftOperator, alpha, path="fast"):
    """Return ``(LossBreakdown, gradient)`` sharing a single forward STFT of ``y``.

    ``Y_hat`` may be a complex array or a prepared :class:`_Target`, which
    saves recomputing reference amplitudes inside optimization loops.
    """
    Y = _fast_entries(op, y)
    terms = _Terms(Y_hat, Y)
    amp_frames = terms.amp_bins().sum(axis=1)
    ph_frames = (alpha * terms.phase_bins()).sum(axis=1)
    loss = LossBreakdown(
        float(amp_frames.sum()), float(ph_frames.sum()), float((amp_frames + ph_frames).sum())
    )
    coef = terms.amp_coef() + alpha * terms.phase_coef()
    return loss, _accumulate(op, coef, path)


def combined_grad(y_hat, y, op: StftOperator, weights=None, path="fast") -> np.ndarray:
    weights = LossWeights() if weights is None else weights
    Y_hat, _ = _spectra(y_hat, y, op)
    return loss_and_grad_from_spectra(Y_hat, as_samples(y), op, _alpha_for(weights, op), path)[1]


def bessel_i0(beta: float) -> float:
    """Modified Bessel function of the first kind, order 0, by power series."""
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    q = (beta / 2.0) ** 2
    terms = [1.0]
    partial = 1.0
    k = 0
    while True:
        k += 1
        term = terms[-1] * q / (k * k)
        terms.append(term)
        partial += term
        if term < 1e-17 * partial:
            return math.fsum(terms)


def log_gaussian(x, mu, var=1.0):
    return -0.5 * np.log(2.0 * np.pi * var) - (np.asarray(x) - mu) ** 2 / (2.0 * var)


def log_von_mises(x, mu, beta=1.0):
    return beta * np.cos(np.asarray(x) - mu) - math.log(2.0 * math.pi * bessel_i0(beta))


def negative_log_likelihood(y_hat, y, op: StftOperator, weights=None) -> float:
    """``-log prod P_g(A_hat | A, 1) * P_vm(theta_hat | theta, 1) ** alpha``.

    Bins where either amplitude is floored take ``theta_hat == theta``, which
    matches the zero phase loss assigned to them by :func:`combined_loss`.
    """
    weights = LossWeights() if weights is None else weights
    Y_hat, Y = _spectra(y_hat, y, op)
    alpha = _alpha_for(weights, op)
    A_hat, A = np.abs(Y_hat), np.abs(Y)
    theta_hat = np.where(A_hat > 0, np.angle(Y_hat), 0.0)
    theta = np.where(A > 0, np.angle(Y), 0.0)
    floored = (A_hat < AMPLITUDE_FLOOR) | (A < AMPLITUDE_FLOOR)
    theta_hat = np.where(floored, theta, theta_hat)
    per_bin = -log_gaussian(A_hat, A) - alpha * log_von_mises(theta_hat, theta)
    return float(per_bin.sum(axis=1).sum())


def likelihood_offset(alpha: np.ndarray) -> float:
    """Constant separating the negative log-likelihood from the combined loss."""
    alpha = np.asarray(alpha, dtype=np.float64)
    per_bin = 0.5 * math.log(2.0 * math.pi) + alpha * (math.log(2.0 * math.pi * bessel_i0(1.0)) - 1.0)
    return float(per_bin.sum(axis=1).sum())
