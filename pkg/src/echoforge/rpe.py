"""Residual echo power estimation.

Echo the canceler could not remove still couples linearly to the far-end
reference. Two trackers estimate that coupling per partition as a
least-squares transfer (smoothed cross-PSD over smoothed auto-PSD): a
high estimate from (microphone, reference), valid when the mic is mostly
echo, and a low estimate from (canceler error, reference), safe during
near-end activity. The double-talk probability blends them:

    residual_power = (1 - p_dt) * high + p_dt * low
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

COUPLING_REG = 1e-8


@dataclass(frozen=True)
class RpeParams:
    partitions_high: int = 4
    partitions_low: int = 2
    alpha_high: float = 0.92
    alpha_low: float = 0.92

    def __post_init__(self):
        if self.partitions_high < 1 or self.partitions_low < 1:
            raise ConfigError("partition counts must be >= 1")
        for name in ("alpha_high", "alpha_low"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {v}")


class _CouplingTracker:
    """Per-partition least-squares coupling of a target onto the reference."""

    def __init__(self, partitions: int, alpha: float, n_bins: int):
        self.alpha = alpha
        self.x_history = np.zeros((partitions, n_bins), dtype=complex)
        self.cross = np.zeros((partitions, n_bins), dtype=complex)
        self.auto = np.zeros((partitions, n_bins))

    def update(self, target_frame: np.ndarray, x_frame: np.ndarray) -> np.ndarray:
        self.x_history[1:] = self.x_history[:-1]
        self.x_history[0] = x_frame
        a = self.alpha
        self.cross = a * self.cross + (1 - a) * target_frame[None, :] * np.conj(self.x_history)
        self.auto = a * self.auto + (1 - a) * np.abs(self.x_history) ** 2
        coupling = self.cross / (self.auto + COUPLING_REG)
        power = np.sum(np.abs(coupling) ** 2 * np.abs(self.x_history) ** 2, axis=0)
        return power


class ResidualPowerEstimator:
    """Sequential per-stream state holding both coupling trackers."""

    def __init__(self, params: RpeParams, n_bins: int):
        self.params = params
        self.n_bins = n_bins
        self._high = _CouplingTracker(params.partitions_high, params.alpha_high, n_bins)
        self._low = _CouplingTracker(params.partitions_low, params.alpha_low, n_bins)
        self.power_high = np.zeros(n_bins)
        self.power_low = np.zeros(n_bins)

    def _check(self, frame: np.ndarray) -> np.ndarray:
        frame = np.asarray(frame)
        if frame.shape != (self.n_bins,):
            raise InputError(f"expected frame of shape ({self.n_bins},), got {frame.shape}")
        return frame

    def update_high(self, y_frame: np.ndarray, x_frame: np.ndarray) -> np.ndarray:
        """Track the mic/reference coupling; returns the high power estimate."""
        self.power_high = self._high.update(self._check(y_frame), self._check(x_frame))
        return self.power_high

    def update_low(self, e_frame: np.ndarray, x_frame: np.ndarray) -> np.ndarray:
        """Track the error/reference coupling; returns the low power estimate."""
        self.power_low = self._low.update(self._check(e_frame), self._check(x_frame))
        return self.power_low


def combine_residual_power(power_high: np.ndarray, power_low: np.ndarray,
                           p_dt: float) -> np.ndarray:
    """Blend high and low estimates by the double-talk probability."""
    if not 0.0 <= p_dt <= 1.0:
        raise InputError(f"p_dt must be in [0, 1], got {p_dt}")
    high = np.asarray(power_high, dtype=float)
    low = np.asarray(power_low, dtype=float)
    if high.shape != low.shape:
        raise InputError(f"shape mismatch: {high.shape} vs {low.shape}")
    if p_dt == 0.0:
        return high.copy()
    if p_dt == 1.0:
        return low.copy()
    return (1.0 - p_dt) * high + p_dt * low
