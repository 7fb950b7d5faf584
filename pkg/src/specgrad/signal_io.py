"""Waveform, spectrogram and voiced/unvoiced flag persistence.

Formats
-------
WAV
    RIFF/WAVE, 16-bit PCM, mono. Samples map to floats by division by 32768.
SPC1
    16-byte header (magic ``b"SPC1"``, then little-endian u32 T, K and a flag
    word whose bit 0 marks a one-sided spectrogram) followed by ``T*K``
    row-major complex entries stored as two little-endian f64 (re, im).
Flags
    UTF-8 text, one ``0`` or ``1`` per line.
"""

from __future__ import annotations

import logging
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, FormatError, UnsupportedFormatError
from .stft import ComplexSpectrogram, StftConfig

logger = logging.getLogger(__name__)

PCM_SCALE = 32768.0
SPC1_MAGIC = b"SPC1"
_SPC1_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class Waveform:
    """Real-valued samples with their sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise DegenerateInputError("a waveform needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if isinstance(self.sample_rate, bool) or int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.samples, dtype=dtype)


@dataclass(frozen=True)
class VuvFlags:
    """One voiced (1) / unvoiced (0) flag per STFT frame."""

    flags: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.flags)
        if flags.ndim != 1:
            raise ValueError("flags must be one-dimensional")
        if flags.size and not np.all((flags == 0) | (flags == 1)):
            raise ValueError("flags must be 0 or 1")
        flags = flags.astype(np.int8)
        flags.setflags(write=False)
        object.__setattr__(self, "flags", flags)

    @property
    def frame_count(self) -> int:
        return self.flags.shape[0]

    def __len__(self):
        return self.frame_count

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.flags, dtype=dtype)


def read_wav(path) -> Waveform:
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError, struct.error) as exc:
        raise FormatError(f"{path}: not a readable PCM WAV file ({exc})") from exc
    if channels != 1:
        raise UnsupportedFormatError(f"{path}: {channels} channels, only mono is supported")
    if width != 2:
        raise UnsupportedFormatError(f"{path}: {8 * width}-bit samples, only 16-bit PCM is supported")
    if len(raw) < 2:
        raise FormatError(f"{path}: empty data chunk")
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / PCM_SCALE, rate)


def quantize(samples) -> tuple[np.ndarray, int]:
    """Round to 16-bit PCM; returns the integer samples and the number clipped."""
    x = np.asarray(samples, dtype=np.float64)
    clipped = int(np.count_nonzero(np.abs(x) > 1.0))
    pcm = np.clip(np.rint(x * PCM_SCALE), -32768, 32767).astype("<i2")
    return pcm, clipped


def write_wav(w: Waveform, path) -> int:
    """Write 16-bit PCM mono; returns how many samples fell outside [-1, 1]."""
    pcm, clipped = quantize(w.samples)
    if clipped:
        logger.warning("%s: clipped %d samples outside [-1, 1]", path, clipped)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(pcm.tobytes())
    return clipped


def normalize(w) -> tuple[Waveform, float, float]:
    """Shift and scale to zero mean and unit population variance.

    Returns the normalized waveform with the mean and standard deviation
    needed to undo it (``x * std + mean``).
    """
    rate = getattr(w, "sample_rate", 16000)
    x = np.asarray(getattr(w, "samples", w), dtype=np.float64)
    if x.size < 2:
        raise DegenerateInputError("normalization needs at least two samples")
    mean = float(np.mean(x))
    std = float(np.std(x))
    if std == 0.0:
        raise DegenerateInputError("cannot normalize a constant signal")
    return Waveform((x - mean) / std, rate), mean, std


def denormalize(w, mean: float, std: float) -> Waveform:
    rate = getattr(w, "sample_rate", 16000)
    return Waveform(np.asarray(getattr(w, "samples", w)) * std + mean, rate)


def write_spectra(spec: ComplexSpectrogram, path) -> None:
    entries = np.asarray(getattr(spec, "entries", spec), dtype=np.complex128)
    if entries.ndim != 2:
        raise ValueError(f"spectrogram must be 2-D, got shape {entries.shape}")
    if not np.all(np.isfinite(entries)):
        raise ValueError("spectrogram contains non-finite entries")
    T, K = entries.shape
    one_sided = getattr(spec, "one_sided", True)
    header = _SPC1_HEADER.pack(SPC1_MAGIC, T, K, 1 if one_sided else 0)
    payload = np.ascontiguousarray(entries).view("<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_spectra(path, config: StftConfig | None = None) -> ComplexSpectrogram:
    """Load an SPC1 file.

    When ``config`` is given it is attached to the result after checking that
    its bin count and sidedness match the file.
    """
    data = Path(path).read_bytes()
    if len(data) < _SPC1_HEADER.size:
        raise FormatError(f"{path}: truncated SPC1 header")
    magic, T, K, flags = _SPC1_HEADER.unpack_from(data)
    if magic != SPC1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {SPC1_MAGIC!r}")
    expected = _SPC1_HEADER.size + 16 * T * K
    if len(data) != expected:
        raise FormatError(f"{path}: payload is {len(data) - _SPC1_HEADER.size} bytes, expected {16 * T * K}")
    one_sided = bool(flags & 1)
    if config is not None and (config.one_sided != one_sided or config.num_bins != K):
        raise FormatError(f"{path}: {K} bins (one_sided={one_sided}) do not match the given STFT config")
    entries = np.frombuffer(data, dtype="<f8", offset=_SPC1_HEADER.size).view(np.complex128)
    return ComplexSpectrogram(entries.reshape(T, K).copy(), config, one_sided=one_sided)


def read_flags(path) -> VuvFlags:
    text = Path(path).read_text(encoding="utf-8")
    values = []
    for lineno, token in enumerate(text.splitlines(), start=1):
        token = token.strip()
        if token not in ("0", "1"):
            raise FormatError(f"{path}:{lineno}: expected '0' or '1', got {token!r}")
        values.append(int(token))
    return VuvFlags(np.array(values, dtype=np.int8))


def write_flags(flags, path) -> None:
    values = np.asarray(getattr(flags, "flags", flags))
    Path(path).write_text("".join(f"{int(v)}\n" for v in values), encoding="utf-8")
