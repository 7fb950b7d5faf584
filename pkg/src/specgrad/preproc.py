"""Voiced/unvoiced flags and the amplitude-removal feedback transform."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from ._validation import as_samples
from .errors import ConfigError, DimensionError
from .signal_io import VuvFlags, Waveform
from .stft import AMPLITUDE_FLOOR, StftConfig, fft_workers, make_operator


@dataclass(frozen=True)
class VuvDetectorConfig:
    """Energy + autocorrelation voicing detector settings.

    Lags are in samples; the defaults cover 50-500 Hz at 16 kHz. The energy
    threshold is relative to the utterance RMS, so detection is gain-invariant.
    """

    frame_length: int = 400
    frame_shift: int = 16
    energy_threshold: float = 0.05
    periodicity_threshold: float = 0.35
    min_lag: int = 32
    max_lag: int = 320

    def __post_init__(self):
        if not 0 < self.energy_threshold < 1:
            raise ConfigError(f"energy_threshold must be in (0, 1), got {self.energy_threshold}")
        if not 0 < self.periodicity_threshold < 1:
            raise ConfigError(f"periodicity_threshold must be in (0, 1), got {self.periodicity_threshold}")
        if not 1 <= self.min_lag < self.max_lag < self.frame_length:
            raise ConfigError(
                f"need 1 <= min_lag < max_lag < frame_length, got {self.min_lag}, {self.max_lag}, {self.frame_length}"
            )
        if not 1 <= self.frame_shift <= self.frame_length:
            raise ConfigError("need 1 <= frame_shift <= frame_length")

    @classmethod
    def for_stft(cls, stft_config: StftConfig, **overrides):
        """Detector config whose framing matches an STFT config."""
        return cls(frame_length=stft_config.frame_length, frame_shift=stft_config.frame_shift, **overrides)


def _frames(x: np.ndarray, length: int, shift: int) -> np.ndarray:
    T = -(-x.shape[0] // shift)
    padded = np.zeros((T - 1) * shift + length)
    padded[: x.shape[0]] = x
    return np.lib.stride_tricks.sliding_window_view(padded, length)[::shift]


def periodicity(frames: np.ndarray, min_lag: int, max_lag: int) -> np.ndarray:
    """Peak of ``r(lag) / r(0)`` over ``[min_lag, max_lag]`` for each frame row.

    ``r`` is the biased autocorrelation; silent frames get 0.
    """
    L = frames.shape[1]
    n = scipy.fft.next_fast_len(2 * L)
    spec = scipy.fft.rfft(frames, n=n, axis=1, workers=fft_workers())
    r = scipy.fft.irfft(np.abs(spec) ** 2, n=n, axis=1, workers=fft_workers())[:, : max_lag + 1]
    r0 = r[:, 0]
    peak = r[:, min_lag : max_lag + 1].max(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(r0 > 0, peak / np.where(r0 > 0, r0, 1.0), 0.0)


def detect_vuv(w, cfg: VuvDetectorConfig | None = None, stft_config: StftConfig | None = None) -> VuvFlags:
    """Flag a frame voiced when it is loud enough and periodic enough.

    When ``stft_config`` is given the detector must produce the same number
    of frames as that STFT would for this waveform.
    """
    x = as_samples(w)
    if cfg is None:
        cfg = VuvDetectorConfig.for_stft(stft_config) if stft_config is not None else VuvDetectorConfig()
    frames = _frames(x, cfg.frame_length, cfg.frame_shift)
    if stft_config is not None:
        expected = make_operator(stft_config, x.shape[0]).num_frames
        if frames.shape[0] != expected:
            raise DimensionError(f"detector yields {frames.shape[0]} frames, STFT framing has {expected}")
    utt_rms = np.sqrt(np.mean(x**2))
    frame_rms = np.sqrt(np.mean(frames**2, axis=1))
    loud = frame_rms > cfg.energy_threshold * utt_rms
    periodic = periodicity(frames, cfg.min_lag, cfg.max_lag) > cfg.periodicity_threshold
    return VuvFlags((loud & periodic).astype(np.int8))


def feedback_transform(segment, fft_size: int | None = None, full_output: bool = False):
    """Replace a segment's FFT magnitudes with 1, keeping its phase.

    The segment is zero-padded to ``fft_size`` (default: its own length) and
    the result has ``fft_size`` samples. Bins with magnitude below the
    amplitude floor are divided by the floor instead, so an all-zero segment
    maps to zeros.

    With ``full_output=True`` also returns a dict with ``floored`` (number of
    floored bins) and ``degenerate`` (every bin floored).
    """
    x = as_samples(segment, name="segment")
    N = x.shape[0] if fft_size is None else int(fft_size)
    if x.shape[0] > N:
        raise DimensionError(f"segment of {x.shape[0]} samples exceeds fft_size {N}")
    spec = scipy.fft.fft(x, n=N)
    mag = np.abs(spec)
    floored = mag < AMPLITUDE_FLOOR
    inv = scipy.fft.ifft(spec / np.where(floored, AMPLITUDE_FLOOR, mag))
    residue = np.max(np.abs(inv.imag))
    if residue >= 1e-9:
        raise ArithmeticError(f"imaginary residue {residue:.3g} after inverse FFT")
    out = inv.real
    if isinstance(segment, Waveform):
        out = Waveform(out, segment.sample_rate)
    if full_output:
        info = {"floored": int(floored.sum()), "degenerate": bool(floored.all())}
        return out, info
    return out
