"""Short-time transform shared by the frequency-domain stages.

Frames are rows of a complex (n_frames, frame_len/2 + 1) array; frame m
covers input samples [m*hop, m*hop + frame_len), the tail zero-padded.
Reconstruction is windowed overlap-add normalized by the accumulated
squared window, so any supported window/hop pair that keeps the overlap
weight positive reconstructs exactly (constant-overlap-add holds by
construction for sqrt-hann at 50% overlap).

Window definitions use the half-sample-shifted periodic form, which is
nonzero at the frame edges; this keeps the first and last samples of a
stream recoverable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .errors import ConfigError, InputError

WINDOWS = ("sqrt-hann", "hann", "rect")


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def make_window(kind: str, frame_len: int) -> np.ndarray:
    if kind == "rect":
        return np.ones(frame_len)
    n = np.arange(frame_len)
    sine = np.sin(np.pi * (n + 0.5) / frame_len)
    if kind == "sqrt-hann":
        return sine
    if kind == "hann":
        return sine**2
    raise ConfigError(f"unknown window {kind!r}, expected one of {WINDOWS}")


@dataclass(frozen=True)
class StftConfig:
    frame_len: int = 512
    hop: int = 256
    window: str = "sqrt-hann"

    def __post_init__(self):
        if not _is_pow2(self.frame_len):
            raise ConfigError(f"frame_len must be a power of two, got {self.frame_len}")
        if not 0 < self.hop <= self.frame_len:
            raise ConfigError(f"hop must be in (0, frame_len], got {self.hop}")
        if self.window not in WINDOWS:
            raise ConfigError(f"unknown window {self.window!r}, expected one of {WINDOWS}")

    @property
    def n_bins(self) -> int:
        return self.frame_len // 2 + 1

    def analysis_window(self) -> np.ndarray:
        return make_window(self.window, self.frame_len)

    def frame_count(self, n_samples: int) -> int:
        if n_samples <= 0:
            return 0
        return int(np.ceil(n_samples / self.hop))


def analyze(buffer: AudioBuffer, cfg: StftConfig) -> np.ndarray:
    """Forward transform: (n_frames, n_bins) complex spectra."""
    x = buffer.samples
    n_frames = cfg.frame_count(len(x))
    if n_frames == 0:
        return np.zeros((0, cfg.n_bins), dtype=complex)
    padded = np.zeros((n_frames - 1) * cfg.hop + cfg.frame_len)
    padded[: len(x)] = x
    idx = np.arange(cfg.frame_len)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    frames = padded[idx] * cfg.analysis_window()[None, :]
    return np.fft.rfft(frames, axis=1)


def synthesize(frames: np.ndarray, cfg: StftConfig, length: int | None = None,
               sample_rate: int = 16000) -> AudioBuffer:
    """Inverse transform via normalized weighted overlap-add.

    Round-trips analyze() exactly (up to float precision) for any valid
    config. `length` trims the trailing analysis padding.
    """
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[1] != cfg.n_bins:
        raise InputError(
            f"expected frames of shape (n, {cfg.n_bins}), got {frames.shape}")
    n_frames = frames.shape[0]
    total = (n_frames - 1) * cfg.hop + cfg.frame_len if n_frames else 0
    if length is None:
        length = total
    out = np.zeros(max(total, length))
    weight = np.zeros(max(total, length))
    if n_frames:
        window = cfg.analysis_window()
        blocks = np.fft.irfft(frames, n=cfg.frame_len, axis=1) * window[None, :]
        wsq = window**2
        for m in range(n_frames):
            start = m * cfg.hop
            out[start : start + cfg.frame_len] += blocks[m]
            weight[start : start + cfg.frame_len] += wsq
    np.divide(out, weight, out=out, where=weight > 1e-12)
    return AudioBuffer(out[:length], sample_rate)


def bin_of_freq(freq_hz: float, frame_len: int, sample_rate: int) -> int:
    """Nearest transform bin for a frequency in Hz."""
    return int(round(freq_hz * frame_len / sample_rate))
