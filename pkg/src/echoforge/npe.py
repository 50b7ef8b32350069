"""Noise power tracking with a speech-presence-probability MMSE recursion.

Per bin, the posterior probability that speech is present follows from a
generalized likelihood ratio under a fixed active-speech SNR; the noise
periodogram estimate blends the current noise estimate and the observed
periodogram by that probability, then feeds an exponential average. A
smoothed-probability guard caps the posterior when it saturates, so the
estimate cannot lock onto speech (Gerkmann & Hendriks style).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

NOISE_FLOOR = 1e-12
COLD_START_FRAMES = 10


@dataclass(frozen=True)
class NpeParams:
    xi_h1: float = 10.0 ** 1.5     # fixed active-speech a-priori SNR (linear)
    p_threshold: float = 0.99      # stuck-estimate guard level
    alpha_p: float = 0.9           # speech-probability smoothing
    alpha_npe: float = 0.9         # noise PSD smoothing

    def __post_init__(self):
        if self.xi_h1 <= 0:
            raise ConfigError(f"xi_h1 must be > 0, got {self.xi_h1}")
        if not 0.0 < self.p_threshold < 1.0:
            raise ConfigError(f"p_threshold must be in (0, 1), got {self.p_threshold}")
        for name in ("alpha_p", "alpha_npe"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {v}")


class NoisePowerEstimator:
    """Sequential per-stream state; one instance per stream.

    Cold start: the first COLD_START_FRAMES periodograms are averaged
    straight into the estimate before the probability recursion engages.
    An explicit initial_power skips the warm-up.
    """

    def __init__(self, params: NpeParams, n_bins: int,
                 initial_power: np.ndarray | None = None):
        self.params = params
        self.n_bins = n_bins
        self.smoothed_p = np.zeros(n_bins)
        if initial_power is not None:
            initial_power = np.asarray(initial_power, dtype=float)
            if initial_power.shape != (n_bins,):
                raise InputError(
                    f"initial_power must have shape ({n_bins},), got {initial_power.shape}")
            self.noise_power = np.maximum(initial_power, NOISE_FLOOR)
            self._warmup_left = 0
        else:
            self.noise_power = np.full(n_bins, NOISE_FLOOR)
            self._warmup_left = COLD_START_FRAMES
            self._warmup_acc = np.zeros(n_bins)
            self._warmup_count = 0

    def update(self, e_frame: np.ndarray) -> np.ndarray:
        """Consume one spectral frame, return the per-bin noise power."""
        e_frame = np.asarray(e_frame)
        if e_frame.shape != (self.n_bins,):
            raise InputError(
                f"expected frame of shape ({self.n_bins},), got {e_frame.shape}")
        periodogram = np.abs(e_frame) ** 2

        if self._warmup_left > 0:
            self._warmup_acc += periodogram
            self._warmup_count += 1
            self._warmup_left -= 1
            self.noise_power = np.maximum(
                self._warmup_acc / self._warmup_count, NOISE_FLOOR)
            return self.noise_power

        p = self.params
        snr_frac = p.xi_h1 / (1.0 + p.xi_h1)
        # posterior speech presence under the fixed-SNR hypothesis
        log_ratio = periodogram / self.noise_power * snr_frac
        prob = 1.0 / (1.0 + (1.0 + p.xi_h1) * np.exp(-np.minimum(log_ratio, 700.0)))

        self.smoothed_p = p.alpha_p * self.smoothed_p + (1 - p.alpha_p) * prob
        stuck = self.smoothed_p > p.p_threshold
        prob = np.where(stuck, np.minimum(prob, p.p_threshold), prob)

        estimate = prob * self.noise_power + (1.0 - prob) * periodogram
        self.noise_power = np.maximum(
            p.alpha_npe * self.noise_power + (1 - p.alpha_npe) * estimate,
            NOISE_FLOOR)
        return self.noise_power
