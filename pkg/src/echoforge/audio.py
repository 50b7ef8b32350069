"""Mono audio buffers and RIFF WAV input/output.

Samples are kept as float64 in full scale [-1, 1). 16-bit PCM files are
mapped to float by division by 32768; 32-bit float files are read as-is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .errors import InputError

_INT16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioBuffer:
    """A mono sampled signal with its sample rate."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InputError(f"expected mono signal, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InputError("samples contain NaN or Inf")
        if self.sample_rate <= 0:
            raise InputError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def energy(self) -> float:
        return float(np.sum(self.samples**2))


def read_wav(path) -> AudioBuffer:
    """Read a mono WAV file (16-bit PCM or 32/64-bit float)."""
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise InputError(f"{path}: expected mono, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / _INT16_SCALE
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise InputError(f"{path}: unsupported sample format {data.dtype}")
    return AudioBuffer(samples, int(rate))


def write_wav(path, buffer: AudioBuffer, fmt: str = "float32") -> None:
    """Write a mono WAV file.

    fmt "float32" writes IEEE float (no clipping, keeps >1 amplitudes from
    heavily scaled mixtures); fmt "int16" clips to [-1, 1) and quantizes.
    """
    if fmt == "float32":
        wavfile.write(path, buffer.sample_rate, buffer.samples.astype(np.float32))
    elif fmt == "int16":
        clipped = np.clip(buffer.samples, -1.0, 32767.0 / _INT16_SCALE)
        wavfile.write(path, buffer.sample_rate,
                      np.round(clipped * _INT16_SCALE).astype(np.int16))
    else:
        raise InputError(f"unsupported WAV format {fmt!r}")
