"""
IMU signal path: noisy, quantized gyro samples and angular acceleration by
backward difference followed by a causal single-pole low-pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_SAMPLE_RATE = 1000.0
DEFAULT_NOISE_STD = 0.005
DEFAULT_CUTOFF = 50.0


@dataclass
class ImuModel:
    """Gyro model. Owns its RNG, so one instance per simulated device.

    ``filter_cutoff=None`` bypasses smoothing: the acceleration estimate is
    then the plain backward difference.
    """

    sample_rate: float = DEFAULT_SAMPLE_RATE
    gyro_noise_std: float = DEFAULT_NOISE_STD
    quantization: float = 0.0
    filter_cutoff: Optional[float] = DEFAULT_CUTOFF
    seed: int = 0
    rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        if not self.gyro_noise_std >= 0:
            raise ValueError(f"gyro_noise_std must be >= 0, got {self.gyro_noise_std}")
        if not self.quantization >= 0:
            raise ValueError(f"quantization must be >= 0, got {self.quantization}")
        if self.filter_cutoff is not None and not 0 < self.filter_cutoff < self.sample_rate / 2:
            raise ValueError(
                f"filter_cutoff must lie in (0, {self.sample_rate / 2}), got {self.filter_cutoff}"
            )
        self.rng = np.random.default_rng(self.seed)

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def smoothing(self) -> float:
        """Per-sample gain ``a`` of ``y += a * (x - y)``."""
        if self.filter_cutoff is None:
            return 1.0
        return 1.0 - math.exp(-2.0 * math.pi * self.filter_cutoff / self.sample_rate)

    @property
    def time_constant(self) -> float:
        if self.filter_cutoff is None:
            return 0.0
        return 1.0 / (2.0 * math.pi * self.filter_cutoff)

    def reseed(self, seed: int | None = None) -> None:
        if seed is not None:
            self.seed = seed
        self.rng = np.random.default_rng(self.seed)


def quantize(value: float, step: float) -> float:
    """Floor-quantize to a multiple of ``step`` (``step == 0`` disables)."""
    if step <= 0:
        return value
    # guard against 0.003/0.001 == 2.9999999999999996
    return math.floor(value / step + 1e-9) * step


def sample_gyro(true_omega: float, model: ImuModel) -> float:
    noisy = true_omega
    if model.gyro_noise_std > 0:
        noisy += model.gyro_noise_std * float(model.rng.standard_normal())
    return quantize(noisy, model.quantization)


class AccelEstimator:
    """Streaming version of :func:`estimate_accel` used in the control loop.

    The filter is initialized with the first difference so a constant
    acceleration is reproduced from the first output onward.
    """

    def __init__(self, model: ImuModel):
        self.a = model.smoothing
        self.dt = model.dt
        self.reset()

    def reset(self) -> None:
        self._prev: Optional[float] = None
        self._y: Optional[float] = None

    def update(self, omega: float) -> float:
        if self._prev is None:
            self._prev = omega
            return 0.0
        diff = (omega - self._prev) / self.dt
        self._prev = omega
        if self._y is None:
            self._y = diff
        else:
            self._y += self.a * (diff - self._y)
        return self._y


def estimate_accel(omega_samples: Sequence[float], model: ImuModel) -> float:
    """Angular acceleration from a window of gyro samples (oldest first).

    Runs the causal filter across the whole window and returns its last
    output.
    """
    samples = np.asarray(omega_samples, dtype=float)
    if samples.ndim != 1 or samples.size < 2:
        raise ValueError("estimate_accel needs a window of at least 2 samples")
    est = AccelEstimator(model)
    out = 0.0
    for w in samples:
        out = est.update(float(w))
    return out
