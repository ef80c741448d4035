"""
1-DoF rotational model of the hand + device system.

Dynamics::

    I * omega_dot = tau_human + tau_gen - D * omega

integrated with semi-implicit (symplectic) Euler: omega first, then theta
with the updated omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, List

# Calibrated so the elastic condition rings at ~2 Hz with k_r = 0.2.
DEFAULT_INERTIA = 1.27e-3
DEFAULT_TIME_STEP = 1e-3


class SimulationError(RuntimeError):
    """Raised when a simulation cannot continue (bad input, torque provider failure)."""

    def __init__(self, message: str, partial: list | None = None):
        super().__init__(message)
        self.partial = partial if partial is not None else []


@dataclass(frozen=True)
class PlantParams:
    inertia_total: float = DEFAULT_INERTIA
    damping_inherent: float = 0.0
    time_step: float = DEFAULT_TIME_STEP

    def __post_init__(self):
        if not (math.isfinite(self.inertia_total) and self.inertia_total > 0):
            raise ValueError(f"inertia_total must be > 0, got {self.inertia_total!r}")
        if not (math.isfinite(self.time_step) and self.time_step > 0):
            raise ValueError(f"time_step must be > 0, got {self.time_step!r}")
        if not (math.isfinite(self.damping_inherent) and self.damping_inherent >= 0):
            raise ValueError(f"damping_inherent must be >= 0, got {self.damping_inherent!r}")


@dataclass(frozen=True)
class PlantState:
    theta: float = 0.0
    omega: float = 0.0
    omega_dot: float = 0.0
    time: float = 0.0


def _check_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} is not finite: {v!r}")


def step(state: PlantState, tau_human: float, tau_gen: float, params: PlantParams) -> PlantState:
    """Advance the plant by one time step.

    Parameters
    ----------
    state : PlantState
        Current state.
    tau_human, tau_gen : float
        Torque from the hand and from the actuator, N*m.
    params : PlantParams

    Returns
    -------
    PlantState
        New state; ``omega_dot`` is the acceleration applied during the step.
    """
    _check_finite(
        theta=state.theta, omega=state.omega, tau_human=tau_human, tau_gen=tau_gen
    )
    dt = params.time_step
    omega_dot = (tau_human + tau_gen - params.damping_inherent * state.omega) / params.inertia_total
    omega = state.omega + omega_dot * dt
    theta = state.theta + omega * dt
    return PlantState(theta=theta, omega=omega, omega_dot=omega_dot, time=state.time + dt)


TorqueSource = Callable[[float, PlantState], float]


def simulate(
    params: PlantParams,
    torque_source: TorqueSource,
    duration: float,
    initial: PlantState | None = None,
) -> List[PlantState]:
    """Run the plant for ``duration`` seconds.

    ``torque_source(t, state)`` returns the total applied torque (human plus
    generated) at the start of each step. Returns ``ceil(duration/dt) + 1``
    states, the first being the initial condition.
    """
    if not (math.isfinite(duration) and duration > 0):
        raise ValueError(f"duration must be > 0, got {duration!r}")
    n_steps = math.ceil(duration / params.time_step - 1e-9)
    state = initial if initial is not None else PlantState()
    states = [state]
    for i in range(n_steps):
        try:
            tau = float(torque_source(state.time, state))
            state = step(state, tau, 0.0, params)
        except Exception as exc:
            raise SimulationError(
                f"simulation aborted at step {i} (t={state.time:.6g} s): {exc}", partial=states
            ) from exc
        states.append(state)
    return states


def kinetic_energy(state: PlantState, params: PlantParams) -> float:
    return 0.5 * params.inertia_total * state.omega**2


def with_time_step(params: PlantParams, time_step: float) -> PlantParams:
    return replace(params, time_step=time_step)
