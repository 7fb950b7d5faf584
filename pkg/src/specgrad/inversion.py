"""Waveform inversion by gradient descent on the combined spectral loss.

The samples themselves are the optimization variable: starting from an
initial waveform, Adam (or plain SGD) follows the analytic gradient of the
amplitude + weighted phase loss against a target spectrogram.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_samples, check_same_length
from .errors import ConfigError, DegenerateInputError, DimensionError, DivergenceError
from .losses import AlphaScheme, LossBreakdown, LossWeights, _alpha_for, _Target, loss_and_grad_from_spectra
from .signal_io import Waveform, normalize
from .stft import StftOperator

logger = logging.getLogger(__name__)

SNR_CAP_DB = 300.0
PATIENCE = 200


@dataclass(frozen=True)
class Sgd:
    lr: float = 1e-3

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")


@dataclass(frozen=True)
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, size: int):
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(params, grad, state: AdamState, hyper: Adam = Adam()):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape or state.m.shape != params.shape:
        raise DimensionError("params, grad and moment shapes must agree")
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient")
    step = state.step + 1
    m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grad
    v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * grad * grad
    m_hat = m / (1.0 - hyper.beta1**step)
    v_hat = v / (1.0 - hyper.beta2**step)
    new = params - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
    return new, AdamState(m, v, step)


def sgd_step(params, grad, hyper: Sgd):
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient")
    return np.asarray(params, dtype=np.float64) - hyper.lr * grad


@dataclass(frozen=True)
class Zeros:
    pass


@dataclass(frozen=True)
class GaussianNoise:
    seed: int = 1
    scale: float = 1e-4


@dataclass(frozen=True)
class Provided:
    waveform: object


@dataclass(frozen=True)
class InversionSettings:
    """Optimizer, initialization and stopping rule.

    The run stops after ``max_iters`` updates, or once the best loss has not
    improved by more than ``stop_tol`` for ``patience`` consecutive
    iterations. ``patience=None`` always runs to ``max_iters``.
    """

    optimizer: Adam | Sgd = field(default_factory=Adam)
    max_iters: int = 20000
    init: Zeros | GaussianNoise | Provided = field(default_factory=GaussianNoise)
    stop_tol: float = 0.0
    log_every: int = 100
    patience: int | None = PATIENCE

    def __post_init__(self):
        if isinstance(self.max_iters, bool) or int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ConfigError(f"max_iters must be a non-negative integer, got {self.max_iters!r}")
        if self.log_every < 1:
            raise ConfigError("log_every must be >= 1")
        if self.stop_tol < 0:
            raise ConfigError("stop_tol must be >= 0")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be >= 1 or None")


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    e_amp: float
    e_phase: float
    e_total: float
    best_total: float


@dataclass
class InversionTrace:
    records: list = field(default_factory=list)
    waveform: np.ndarray | None = None
    best_loss: LossBreakdown | None = None
    best_iter: int = 0
    iterations: int = 0
    stop_reason: str = ""
    settings: InversionSettings | None = None

    @property
    def best_totals(self) -> np.ndarray:
        return np.array([r.best_total for r in self.records])


def initial_waveform(init, size: int) -> np.ndarray:
    if isinstance(init, Zeros):
        return np.zeros(size)
    if isinstance(init, GaussianNoise):
        return init.scale * np.random.default_rng(init.seed).standard_normal(size)
    if isinstance(init, Provided):
        y0 = as_samples(init.waveform)
        if y0.shape[0] != size:
            raise DimensionError(f"provided init has {y0.shape[0]} samples, operator expects {size}")
        return y0.copy()
    raise ConfigError(f"unknown init {init!r}")


def _target_entries(target, op: StftOperator, weights) -> np.ndarray:
    entries = np.asarray(getattr(target, "entries", target))
    if entries.shape != op.shape:
        raise DimensionError(f"target shape {entries.shape} != operator shape {op.shape}")
    if not np.iscomplexobj(entries):
        # amplitude-only target: phase is unknown, so it must not be scored
        if not (isinstance(weights, LossWeights) and weights.scheme is AlphaScheme.AMPLITUDE_ONLY):
            raise ConfigError("an amplitude-only target requires AMPLITUDE_ONLY weights")
        if np.any(entries < 0):
            raise ValueError("target amplitudes must be non-negative")
    return entries.astype(np.complex128)


def invert(target, op: StftOperator, weights=None, settings: InversionSettings | None = None) -> InversionTrace:
    """Fit waveform samples to ``target`` and return the best iterate found.

    ``target`` is a :class:`ComplexSpectrogram` or complex ``(T, K)`` array;
    a real array is read as amplitudes only.
    """
    weights = LossWeights() if weights is None else weights
    settings = InversionSettings() if settings is None else settings
    Y_hat = _Target(_target_entries(target, op, weights))
    alpha = _alpha_for(weights, op)
    opt = settings.optimizer
    y = initial_waveform(settings.init, op.signal_length)
    state = AdamState.zeros(y.shape[0]) if isinstance(opt, Adam) else None

    trace = InversionTrace(settings=settings)
    best_y, best_loss, best_iter = y, None, 0
    last_improvement = 0
    it = 0
    while True:
        with np.errstate(over="ignore", invalid="ignore"):
            # overflow shows up as a non-finite loss and is reported as divergence below
            loss, grad = loss_and_grad_from_spectra(Y_hat, y, op, alpha)
        if not (math.isfinite(loss.e_total) and np.all(np.isfinite(grad))):
            trace.waveform = best_y
            trace.best_loss, trace.best_iter, trace.iterations = best_loss, best_iter, it
            trace.stop_reason = "diverged"
            raise DivergenceError(f"non-finite loss or gradient at iteration {it}", trace=trace)
        if best_loss is None or loss.e_total < best_loss.e_total:
            if best_loss is None or best_loss.e_total - loss.e_total > settings.stop_tol:
                last_improvement = it
            best_y, best_loss, best_iter = y, loss, it
        if it % settings.log_every == 0 or it == settings.max_iters:
            trace.records.append(IterationRecord(it, loss.e_amp, loss.e_phase, loss.e_total, best_loss.e_total))
        if best_loss.e_total == 0.0:
            reason = "zero-loss"
        elif it >= settings.max_iters:
            reason = "max-iters"
        elif settings.patience is not None and it - last_improvement >= settings.patience:
            reason = "no-improvement"
        else:
            reason = ""
        if reason:
            if trace.records[-1].iter != it:
                trace.records.append(IterationRecord(it, loss.e_amp, loss.e_phase, loss.e_total, best_loss.e_total))
            break
        if state is not None:
            y, state = adam_step(y, grad, state, opt)
        else:
            y = sgd_step(y, grad, opt)
        it += 1

    logger.info("inversion stopped after %d iterations (%s), best e_total %.6g at %d",
                it, reason, best_loss.e_total, best_iter)
    trace.waveform = best_y
    trace.best_loss, trace.best_iter, trace.iterations = best_loss, best_iter, it
    trace.stop_reason = reason
    return trace


def snr(reference, estimate) -> float:
    """``10 log10(sum ref**2 / sum (ref - est)**2)`` in dB, capped at 300."""
    ref = as_samples(reference, name="reference")
    est = as_samples(estimate, name="estimate")
    check_same_length(ref, est, ("reference", "estimate"))
    signal = float(np.sum(ref**2))
    if signal == 0.0:
        raise DegenerateInputError("reference has zero energy")
    noise = float(np.sum((ref - est) ** 2))
    if noise == 0.0:
        return SNR_CAP_DB
    return min(SNR_CAP_DB, 10.0 * math.log10(signal / noise))


def write_trace_csv(trace: InversionTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "e_amp", "e_phase", "e_total"])
        for r in trace.records:
            writer.writerow([r.iter, repr(r.e_amp), repr(r.e_phase), repr(r.e_total)])


def synthetic_target(sample_rate: int = 16000, duration: float = 0.25, seed: int = 0) -> Waveform:
    """Two sinusoids (440 and 1320 Hz) plus a 50 ms white-noise burst, normalized.

    The fixed test signal used by the inversion experiments.
    """
    M = int(round(duration * sample_rate))
    t = np.arange(M) / sample_rate
    x = 0.5 * np.sin(2 * np.pi * 440.0 * t) + 0.25 * np.sin(2 * np.pi * 1320.0 * t)
    burst = int(round(0.05 * sample_rate))
    start = int(round(0.1 * sample_rate))
    noise = 0.3 * np.random.default_rng(seed).standard_normal(burst)
    # short durations keep whatever part of the burst fits
    x[start : start + burst] += noise[: max(0, min(burst, M - start))]
    return normalize(Waveform(x, sample_rate))[0]
