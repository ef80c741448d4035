"""
Scissored-pair control moment gyroscope.

Two flywheels of momentum ``h`` are gimballed at ``(phi, -phi)``; the
off-axis components cancel and the pitch-axis output is::

    tau = -2 * h * sin(phi) * phi_dot

``phi`` is measured from the torque-null orientation. The gimbal motor is
abstracted as a rate-limited integrator with hard angle stops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

RPM_TO_RAD_S = 2.0 * math.pi / 60.0

DEFAULT_FLYWHEEL_INERTIA = 1.27e-5  # kg m^2
DEFAULT_SPIN_RPM = 8000.0
DEFAULT_RATE_LIMIT = 20.0  # rad/s
DEFAULT_ANGLE_RANGE = (math.radians(10.0), math.radians(170.0))
DEFAULT_PHI0 = math.pi / 2
# |sin phi| below this is treated as singular (about 2.87 deg); the exact
# inverse is kept for every |sin phi| >= 0.05
SINGULAR_SIN = 0.05


@dataclass(frozen=True)
class FlywheelSpec:
    inertia_fw: float = DEFAULT_FLYWHEEL_INERTIA
    spin_rate: float = DEFAULT_SPIN_RPM * RPM_TO_RAD_S
    h: float = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.inertia_fw) and self.inertia_fw > 0):
            raise ValueError(f"inertia_fw must be > 0, got {self.inertia_fw!r}")
        if not (math.isfinite(self.spin_rate) and self.spin_rate > 0):
            raise ValueError(f"spin_rate must be > 0, got {self.spin_rate!r}")
        object.__setattr__(self, "h", self.inertia_fw * self.spin_rate)

    @classmethod
    def from_rpm(cls, inertia_fw: float, rpm: float) -> "FlywheelSpec":
        return cls(inertia_fw, rpm * RPM_TO_RAD_S)


@dataclass(frozen=True)
class CmgState:
    phi: float = DEFAULT_PHI0
    phi_rate: float = 0.0
    rate_limit: float = DEFAULT_RATE_LIMIT
    angle_range: Tuple[float, float] = DEFAULT_ANGLE_RANGE

    def __post_init__(self):
        lo, hi = self.angle_range
        if not lo < hi:
            raise ValueError(f"angle_range must be increasing, got {self.angle_range}")
        if not self.rate_limit > 0:
            raise ValueError(f"rate_limit must be > 0, got {self.rate_limit}")
        if not lo <= self.phi <= hi:
            raise ValueError(f"phi={self.phi} outside angle_range {self.angle_range}")
        if abs(self.phi_rate) > self.rate_limit:
            raise ValueError(f"|phi_rate|={abs(self.phi_rate)} exceeds rate_limit {self.rate_limit}")


def forward_torque(state: CmgState, spec: FlywheelSpec) -> float:
    """Pitch-axis output torque of the pair at its current gimbal state."""
    return -2.0 * spec.h * math.sin(state.phi) * state.phi_rate


def torque_envelope(phi: float, spec: FlywheelSpec, rate_limit: float) -> float:
    """Largest torque magnitude reachable at ``phi`` within the rate limit."""
    return 2.0 * spec.h * abs(math.sin(phi)) * rate_limit


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def inverse_gimbal_rate(
    tau_desired: float,
    phi: float,
    spec: FlywheelSpec,
    rate_limit: float,
    singular_sin: float = SINGULAR_SIN,
) -> Tuple[float, bool]:
    """Gimbal rate that produces ``tau_desired`` at angle ``phi``.

    Returns ``(rate, saturated)``. Outside the singular band the exact
    inverse is clamped to ``+-rate_limit``. Inside it (``|sin phi| <
    singular_sin``) the gimbal is driven at full rate in the direction that
    grows ``|sin phi|`` and the sample is flagged.
    """
    s = math.sin(phi)
    if abs(s) < singular_sin:
        c = math.cos(phi)
        direction = math.copysign(1.0, s * c) if s != 0.0 else math.copysign(1.0, c)
        return direction * rate_limit, True
    rate = -tau_desired / (2.0 * spec.h * s)
    if abs(rate) > rate_limit:
        return math.copysign(rate_limit, rate), True
    return rate, False


def step_gimbal(state: CmgState, rate_cmd: float, dt: float) -> CmgState:
    """Rate-limited gimbal integration with hard stops.

    Hitting a stop pins ``phi`` at the bound and zeroes the rate.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    lim = state.rate_limit
    rate = _clamp(rate_cmd, -lim, lim)
    phi = state.phi + rate * dt
    lo, hi = state.angle_range
    if phi <= lo:
        phi, rate = lo, 0.0
    elif phi >= hi:
        phi, rate = hi, 0.0
    return CmgState(phi, rate, lim, state.angle_range)
