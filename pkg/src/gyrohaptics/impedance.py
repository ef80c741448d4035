"""
Impedance law for the handheld object.

The generated torque renders a change of inertia and damping plus the
restorative torque of a virtual two-mass elastic rod::

    tau_gen = -dI * alpha - dD * omega - T_e

``T_e`` comes from a base mass driven by the measured acceleration and a
tip mass coupled to it by a spring/damper (see :func:`elastic_step`).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Mapping, Tuple

from .plant import DEFAULT_INERTIA

DEFAULT_DIVERGENCE_BOUND = 10.0  # rad


class ElasticDivergence(RuntimeError):
    """The virtual rod bent past the configured bound."""


@dataclass(frozen=True)
class ImpedanceParams:
    delta_inertia: float = 0.0
    delta_damping: float = 0.0
    k_r: float = 0.0
    c_r: float = 0.0
    tip_inertia: float = DEFAULT_INERTIA

    def __post_init__(self):
        for name in ("delta_inertia", "delta_damping", "k_r", "c_r", "tip_inertia"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.k_r < 0:
            raise ValueError(f"k_r must be >= 0, got {self.k_r}")
        if self.c_r < 0:
            raise ValueError(f"c_r must be >= 0, got {self.c_r}")
        if self.tip_inertia <= 0:
            raise ValueError(f"tip_inertia must be > 0, got {self.tip_inertia}")

    @property
    def is_elastic(self) -> bool:
        return self.k_r != 0.0 or self.c_r != 0.0


@dataclass(frozen=True)
class ElasticState:
    theta1: float = 0.0
    omega1: float = 0.0
    alpha1: float = 0.0
    theta2: float = 0.0
    omega2: float = 0.0
    alpha2: float = 0.0

    @classmethod
    def reset(cls) -> "ElasticState":
        return cls()

    @property
    def bend(self) -> float:
        return self.theta2 - self.theta1


def elastic_step(
    state: ElasticState,
    base_accel_measured: float,
    dt: float,
    params: ImpedanceParams,
    divergence_bound: float = DEFAULT_DIVERGENCE_BOUND,
) -> Tuple[float, ElasticState]:
    """One tick of the two-mass elastic rod.

    The grip (base) is integrated from the measured acceleration, the bend
    torque is computed from the base/tip difference, and the tip is then
    integrated under that torque. Both integrations are semi-implicit Euler.

    Returns
    -------
    (T_e, new_state)
        ``T_e`` in N*m acts on the tip; the hand feels ``-T_e``.

    Raises
    ------
    ElasticDivergence
        if ``|theta2 - theta1|`` exceeds ``divergence_bound``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    if not math.isfinite(base_accel_measured):
        raise ValueError(f"base acceleration is not finite: {base_accel_measured!r}")

    # grip
    alpha1 = base_accel_measured
    omega1 = state.omega1 + alpha1 * dt
    theta1 = state.theta1 + omega1 * dt

    # bend and restoring torque
    d_theta = state.theta2 - theta1
    d_omega = state.omega2 - omega1
    torque = -params.k_r * d_theta - params.c_r * d_omega

    # tip
    alpha2 = torque / params.tip_inertia
    omega2 = state.omega2 + alpha2 * dt
    theta2 = state.theta2 + omega2 * dt

    new = ElasticState(theta1, omega1, alpha1, theta2, omega2, alpha2)
    if not (math.isfinite(theta2) and abs(theta2 - theta1) <= divergence_bound):
        raise ElasticDivergence(
            f"elastic bend {theta2 - theta1:.6g} rad exceeds bound {divergence_bound} rad"
        )
    return torque, new


def generated_torque(
    omega_meas: float, alpha_meas: float, elastic_Te: float, params: ImpedanceParams
) -> float:
    """Torque command rendering the impedance change."""
    return -params.delta_inertia * alpha_meas - params.delta_damping * omega_meas - elastic_Te


class ImpedanceController:
    """Stateful wrapper: owns the elastic state of one control loop."""

    def __init__(self, params: ImpedanceParams, dt: float,
                 divergence_bound: float = DEFAULT_DIVERGENCE_BOUND):
        self.params = params
        self.dt = dt
        self.divergence_bound = divergence_bound
        self.elastic = ElasticState.reset()
        self.last_Te = 0.0

    def reset(self) -> None:
        self.elastic = ElasticState.reset()
        self.last_Te = 0.0

    def update(self, omega_meas: float, alpha_meas: float) -> float:
        if self.params.is_elastic:
            self.last_Te, self.elastic = elastic_step(
                self.elastic, alpha_meas, self.dt, self.params, self.divergence_bound
            )
        return generated_torque(omega_meas, alpha_meas, self.last_Te, self.params)


# ---------------------------------------------------------------------------
# Conditions
# ---------------------------------------------------------------------------

CONDITION_NAMES = (
    "increased-inertia",
    "decreased-inertia",
    "damping-increase",
    "damping-decrease",
    "elasticity-increase",
)

# name -> (dI, dD, k_r, c_r)
_TABLE1 = {
    "increased-inertia": (0.002, 0.0, 0.0, 0.0),
    "decreased-inertia": (-0.002, 0.0, 0.0, 0.0),
    "damping-increase": (0.0, 0.02, 0.0, 0.0),
    "damping-decrease": (0.0, -0.02, 0.0, 0.0),
    "elasticity-increase": (0.0, 0.0, 0.2, 0.001),
}

# Config keys follow the symbols used in the condition table.
CONFIG_KEYS = {
    "delta_I": "delta_inertia",
    "delta_D": "delta_damping",
    "k_r": "k_r",
    "c_r": "c_r",
    "I_tip": "tip_inertia",
}


@dataclass(frozen=True)
class Condition:
    name: str
    params: ImpedanceParams

    def to_config(self) -> Dict[str, float]:
        fields = asdict(self.params)
        return {key: fields[attr] for key, attr in CONFIG_KEYS.items()}

    @classmethod
    def from_config(cls, name: str, table: Mapping[str, float],
                    tip_inertia: float = DEFAULT_INERTIA) -> "Condition":
        unknown = set(table) - set(CONFIG_KEYS)
        if unknown:
            raise ValueError(
                f"conditions.{name}: unknown key(s) {sorted(unknown)}; "
                f"expected a subset of {sorted(CONFIG_KEYS)}"
            )
        kwargs = {"tip_inertia": tip_inertia}
        for key, value in table.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValueError(f"conditions.{name}.{key}: expected a number, got {value!r}")
            kwargs[CONFIG_KEYS[key]] = float(value)
        try:
            return cls(name, ImpedanceParams(**kwargs))
        except ValueError as exc:
            raise ValueError(f"conditions.{name}: {exc}") from None


def normalize_name(name: str) -> str:
    """``"Increased inertia"`` -> ``"increased-inertia"``."""
    return "-".join(name.strip().lower().replace("_", " ").split())


def table1_conditions(tip_inertia: float = DEFAULT_INERTIA) -> List[Condition]:
    """The five canonical impedance conditions."""
    out = []
    for name in CONDITION_NAMES:
        dI, dD, k, c = _TABLE1[name]
        out.append(Condition(name, ImpedanceParams(dI, dD, k, c, tip_inertia)))
    return out


def lookup_condition(name: str, conditions: List[Condition] | None = None) -> Condition:
    conditions = conditions if conditions is not None else table1_conditions()
    key = normalize_name(name)
    for cond in conditions:
        if cond.name == key:
            return cond
    raise KeyError(f"unknown condition {name!r}; known: {[c.name for c in conditions]}")
