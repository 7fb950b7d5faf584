"""Linear STFT operator with a literal matrix path and an FFT fast path.

Frames start at ``t * frame_shift`` with no centering; the signal is
zero-padded at the end so that ``T = ceil(M / S)`` frames cover every sample.
Each frame of ``frame_length`` samples is windowed, zero-padded to
``fft_size`` and transformed with the unnormalized DFT ``exp(-2j*pi*n*k/N)``.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

from ._validation import as_samples
from .errors import ConfigError, DimensionError

#: Amplitudes below this value are treated as zero by phase terms and gradients.
AMPLITUDE_FLOOR = 1e-8


class Window(str, enum.Enum):
    RECTANGULAR = "rectangular"
    HANN = "hann"


def fft_workers() -> int:
    """Thread cap for FFT calls, from ``SPECGRAD_THREADS`` (default 1).

    Each frame is transformed independently, so results do not depend on it.
    """
    raw = os.environ.get("SPECGRAD_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SPECGRAD_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


@dataclass(frozen=True)
class StftConfig:
    """Framing and transform parameters.

    Parameters
    ----------
    frame_length : int
        Samples per frame (L).
    frame_shift : int
        Hop between frame starts (S).
    fft_size : int
        DFT size (N), a power of two with ``N >= L``.
    window : Window or str
        ``"rectangular"`` (default) or ``"hann"`` (periodic).
    one_sided : bool
        Keep only the ``N // 2 + 1`` non-negative frequency bins.
    """

    frame_length: int = 400
    frame_shift: int = 16
    fft_size: int = 512
    window: Window = Window.RECTANGULAR
    one_sided: bool = True

    def __post_init__(self):
        try:
            object.__setattr__(self, "window", Window(self.window))
        except ValueError:
            raise ConfigError(f"unknown window {self.window!r}") from None
        for name in ("frame_length", "frame_shift", "fft_size"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        L, S, N = self.frame_length, self.frame_shift, self.fft_size
        if not 1 <= S <= L <= N:
            raise ConfigError(f"need 1 <= frame_shift <= frame_length <= fft_size, got S={S}, L={L}, N={N}")
        if N & (N - 1):
            raise ConfigError(f"fft_size must be a power of two, got {N}")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1 if self.one_sided else self.fft_size

    def window_values(self) -> np.ndarray:
        L = self.frame_length
        if self.window is Window.HANN:
            return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(L) / L)
        return np.ones(L)

    def num_frames(self, signal_length: int) -> int:
        return math.ceil(signal_length / self.frame_shift)


@dataclass(frozen=True)
class StftOperator:
    """The STFT as a linear map from ``M`` samples to ``T x K`` complex values."""

    config: StftConfig
    signal_length: int
    window: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.signal_length < 1:
            raise ConfigError(f"signal_length must be >= 1, got {self.signal_length}")
        object.__setattr__(self, "window", self.config.window_values())

    @property
    def num_frames(self) -> int:
        return self.config.num_frames(self.signal_length)

    @property
    def num_bins(self) -> int:
        return self.config.num_bins

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_frames, self.num_bins

    @property
    def padded_length(self) -> int:
        """Length of the zero-padded signal covered by all frames."""
        return (self.num_frames - 1) * self.config.frame_shift + self.config.frame_length

    def frame_support(self, t: int) -> range:
        """Sample indices with nonzero weight in frame ``t`` (clipped to the signal)."""
        start = t * self.config.frame_shift
        return range(start, min(start + self.config.frame_length, self.signal_length))

    def row(self, t: int, n: int) -> np.ndarray:
        """Row ``W[t, n]`` of the operator as a dense length-``M`` complex vector."""
        L, N = self.config.frame_length, self.config.fft_size
        out = np.zeros(self.signal_length, dtype=np.complex128)
        support = self.frame_support(t)
        k = np.arange(len(support))
        out[support.start:support.stop] = self.window[k] * np.exp(-2j * np.pi * n * k / N)
        return out

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense ``(T*K, M)`` operator matrix, rows ordered frame-major."""
        T, K = self.shape
        L, S, N = self.config.frame_length, self.config.frame_shift, self.config.fft_size
        W = np.zeros((T, K, self.signal_length), dtype=np.complex128)
        n = np.arange(K)[:, None]
        for t in range(T):
            support = self.frame_support(t)
            k = np.arange(len(support))[None, :]
            W[t, :, support.start:support.stop] = self.window[k] * np.exp(-2j * np.pi * n * k / N)
        W.setflags(write=False)
        return W.reshape(T * K, self.signal_length)

    def frames(self, y) -> np.ndarray:
        """Windowed frames as a ``(T, L)`` array."""
        y = self._check_signal(y)
        L, S = self.config.frame_length, self.config.frame_shift
        padded = np.zeros(self.padded_length)
        padded[: self.signal_length] = y
        view = np.lib.stride_tricks.sliding_window_view(padded, L)[::S]
        return view * self.window

    def _check_signal(self, y) -> np.ndarray:
        y = as_samples(y)
        if y.shape[0] != self.signal_length:
            raise DimensionError(f"signal has {y.shape[0]} samples, operator expects {self.signal_length}")
        return y

    def accumulate_fast(self, coef: np.ndarray) -> np.ndarray:
        """Return ``sum_{t,n} Re(coef[t, n] * conj(W[t, n]))`` via inverse FFTs.

        This is the adjoint-style accumulation every gradient in this package
        reduces to. In one-sided mode the inverse real FFT implicitly doubles
        the interior bins, so they are halved first to reproduce the literal
        sum over the stored bins.
        """
        coef = np.asarray(coef, dtype=np.complex128)
        if coef.shape != self.shape:
            raise DimensionError(f"coefficient shape {coef.shape} != operator shape {self.shape}")
        L, S, N = self.config.frame_length, self.config.frame_shift, self.config.fft_size
        workers = fft_workers()
        if self.config.one_sided:
            half = coef.copy()
            half[:, 1 : N // 2] *= 0.5
            per_frame = N * scipy.fft.irfft(half, n=N, axis=1, workers=workers)
        else:
            per_frame = N * scipy.fft.ifft(coef, n=N, axis=1, workers=workers).real
        return self._overlap_add(per_frame[:, :L] * self.window)

    def _overlap_add(self, frames: np.ndarray) -> np.ndarray:
        T = self.num_frames
        L, S = self.config.frame_length, self.config.frame_shift
        q = -(-L // S)
        blocks = np.zeros((T, q * S))
        blocks[:, :L] = frames
        blocks = blocks.reshape(T, q, S)
        out = np.zeros((T + q - 1, S))
        # frame t's j-th shift-sized block lands on output block t + j; fixed order keeps sums reproducible
        for j in range(q):
            out[j : j + T] += blocks[:, j]
        return out.reshape(-1)[: self.signal_length]

    def accumulate_matrix(self, coef: np.ndarray) -> np.ndarray:
        """Same as :meth:`accumulate_fast` using explicit operator rows."""
        coef = np.asarray(coef, dtype=np.complex128)
        if coef.shape != self.shape:
            raise DimensionError(f"coefficient shape {coef.shape} != operator shape {self.shape}")
        return np.real(coef.reshape(-1) @ np.conj(self.matrix))


@dataclass(frozen=True)
class ComplexSpectrogram:
    """``T x K`` complex STFT coefficients with amplitude and phase views."""

    entries: np.ndarray
    config: StftConfig | None = None
    one_sided: bool | None = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.complex128)
        if entries.ndim != 2:
            raise DimensionError(f"spectrogram must be 2-D, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("spectrogram contains non-finite entries")
        if self.config is not None and entries.shape[1] != self.config.num_bins:
            raise DimensionError(f"{entries.shape[1]} bins, config implies {self.config.num_bins}")
        if self.one_sided is None:
            object.__setattr__(self, "one_sided", True if self.config is None else self.config.one_sided)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def amplitude(self) -> np.ndarray:
        return amp_phase(self)[0]

    @property
    def phase(self) -> np.ndarray:
        return amp_phase(self)[1]


def make_operator(cfg: StftConfig, signal_length: int) -> StftOperator:
    if not isinstance(cfg, StftConfig):
        raise ConfigError(f"expected StftConfig, got {type(cfg).__name__}")
    return StftOperator(cfg, int(signal_length))


def stft_matrix(op: StftOperator, y) -> ComplexSpectrogram:
    """Reference path: one explicit dot product per operator row."""
    y = op._check_signal(y)
    T, K = op.shape
    return ComplexSpectrogram((op.matrix @ y).reshape(T, K), op.config)


def stft_fast(op: StftOperator, y) -> ComplexSpectrogram:
    """FFT path, equal to :func:`stft_matrix` up to rounding."""
    return ComplexSpectrogram(_fast_entries(op, y), op.config)


def _fast_entries(op: StftOperator, y) -> np.ndarray:
    frames = op.frames(y)
    N = op.config.fft_size
    if op.config.one_sided:
        return scipy.fft.rfft(frames, n=N, axis=1, workers=fft_workers())
    return scipy.fft.fft(frames, n=N, axis=1, workers=fft_workers())


def amp_phase(spec) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude ``|Y|`` and phase ``atan2(Im Y, Re Y)``; phase is 0 where ``|Y| == 0``.

    Accepts a :class:`ComplexSpectrogram` or a complex array.
    """
    Y = np.asarray(getattr(spec, "entries", spec), dtype=np.complex128)
    A = np.abs(Y)
    theta = np.where(A > 0, np.angle(Y), 0.0)
    # keep the phase in (-pi, pi]
    theta = np.where(theta == -np.pi, np.pi, theta)
    return A, theta
