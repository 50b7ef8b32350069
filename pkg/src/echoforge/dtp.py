"""Frame-wise double-talk probability from echo-estimate/microphone coherence.

While the canceler tracks the echo path, its echo estimate stays coherent
with the microphone whenever the mic holds echo alone; near-end speech on
top of the echo pulls the coherence down. A two-state forward recursion
turns the per-frame coherence into a probability of double talk:

* transition probabilities a01 (enter double talk) and a10 (leave) shape
  the prior between frames;
* the double-talk likelihood of a frame is one minus its mean coherence
  over the configured bin range;
* b01/b10 drive a coherence-threshold hysteresis comparator whose active
  state pins the evidence high until the coherence clearly recovers (an
  interpretation: the comparator enters below coherence b01 and leaves
  above 1 - b10, debounced over the tau time constant so single frames
  cannot latch it).

The probability is smoothed with beta and starts at the uninformative 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

COHERENCE_EPS = 1e-10
SILENCE_POWER = 1e-12


@dataclass(frozen=True)
class DtpParams:
    a01: float = 0.01
    a10: float = 0.01
    b01: float = 0.1
    b10: float = 0.1
    alpha: float = 0.9            # PSD smoothing
    beta: float = 0.7             # probability smoothing
    k_begin: int = 10             # ~300 Hz at 512/16k
    k_end: int = 109              # ~3400 Hz
    frame_duration: float = 0.016  # seconds per frame hop
    tau: float = 0.1              # hysteresis debounce time constant, seconds

    def __post_init__(self):
        for name in ("a01", "a10", "b01", "b10"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {v}")
        if not 0 <= self.k_begin < self.k_end:
            raise ConfigError(
                f"need 0 <= k_begin < k_end, got [{self.k_begin}, {self.k_end}]")
        if self.frame_duration <= 0 or self.tau <= 0:
            raise ConfigError("frame_duration and tau must be positive")

    def debounce_frames(self) -> int:
        """Frames the comparator condition must persist, from tau."""
        return max(1, round(self.tau / self.frame_duration))


class DtpEstimator:
    """Sequential per-stream state; do not share across streams."""

    def __init__(self, params: DtpParams, n_bins: int):
        if params.k_end > n_bins - 1:
            raise ConfigError(
                f"k_end {params.k_end} exceeds last bin {n_bins - 1}")
        self.params = params
        self.n_bins = n_bins
        self.p_dt = 0.5
        self.psd_dd = np.zeros(n_bins)
        self.psd_yy = np.zeros(n_bins)
        self.psd_dy = np.zeros(n_bins, dtype=complex)
        self.coherence = np.zeros(n_bins)
        self._hysteresis = False
        self._pending = 0

    def update(self, d_hat_frame: np.ndarray, y_frame: np.ndarray) -> float:
        """Consume one frame pair and return the double-talk probability."""
        p = self.params
        d = np.asarray(d_hat_frame)
        y = np.asarray(y_frame)
        if d.shape != (self.n_bins,) or y.shape != (self.n_bins,):
            raise InputError(
                f"expected frames of shape ({self.n_bins},), got {d.shape}, {y.shape}")

        a = p.alpha
        self.psd_dd = a * self.psd_dd + (1 - a) * np.abs(d) ** 2
        self.psd_yy = a * self.psd_yy + (1 - a) * np.abs(y) ** 2
        self.psd_dy = a * self.psd_dy + (1 - a) * d * np.conj(y)

        band = slice(p.k_begin, p.k_end + 1)
        if (np.mean(self.psd_dd[band]) < SILENCE_POWER
                and np.mean(self.psd_yy[band]) < SILENCE_POWER):
            return self.p_dt  # silence is uninformative

        self.coherence = np.abs(self.psd_dy) ** 2 / (
            self.psd_dd * self.psd_yy + COHERENCE_EPS)
        mean_coh = float(np.mean(self.coherence[band]))

        likelihood = 1.0 - min(max(mean_coh, 0.0), 1.0)

        # hysteresis comparator on the same coherence (enter below b01,
        # leave above 1 - b10, after a tau-long debounce); pins evidence
        # high in the clearly incoherent regime without chattering
        enter = min(p.b01, 1.0 - p.b10)
        leave = max(p.b01, 1.0 - p.b10)
        crossing = mean_coh > leave if self._hysteresis else mean_coh < enter
        self._pending = self._pending + 1 if crossing else 0
        if self._pending >= p.debounce_frames():
            self._hysteresis = not self._hysteresis
            self._pending = 0
        if self._hysteresis:
            likelihood = 1.0

        prior = self.p_dt * (1.0 - p.a10) + (1.0 - self.p_dt) * p.a01
        num = prior * likelihood
        den = num + (1.0 - prior) * (1.0 - likelihood)
        posterior = num / den if den > 0 else prior

        self.p_dt = p.beta * self.p_dt + (1 - p.beta) * posterior
        self.p_dt = min(max(self.p_dt, 0.0), 1.0)
        return self.p_dt
