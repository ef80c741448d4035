"""
Run configuration for ``gyrohaptics measure``.

A single TOML file with sections ``[run] [plant] [cmg] [imu] [swing]
[conditions]``. Every key is optional and unknown keys are rejected. The
``[conditions]`` section, when present, replaces the five default
conditions; each sub-table uses the keys ``delta_I, delta_D, k_r, c_r`` and
optionally ``I_tip`` (defaults to ``plant.inertia_total``).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cmg import SINGULAR_SIN, CmgState, FlywheelSpec, RPM_TO_RAD_S
from .harness import HarnessConfig, SwingProfile
from .impedance import Condition, normalize_name, table1_conditions
from .plant import PlantParams
from .sensing import ImuModel


class ConfigError(ValueError):
    pass


# section -> key -> default
DEFAULTS: Dict[str, Dict[str, Any]] = {
    "run": {"output_dir": "measure-out", "seed": 0, "workers": 1},
    "plant": {"inertia_total": 1.27e-3, "damping_inherent": 0.0, "time_step": 1e-3},
    "cmg": {
        "flywheel_inertia": 1.27e-5,
        "spin_rpm": 8000.0,
        "rate_limit": 20.0,
        "angle_min_deg": 10.0,
        "angle_max_deg": 170.0,
        "phi0_deg": 90.0,
        "singular_sin": 0.05,
    },
    "imu": {"noise_std": 0.005, "quantization": 0.0, "filter_cutoff": 50.0},
    "swing": {
        "amplitude": 0.5,
        "frequency": 1.0,
        "n_swings": 3,
        "rest_between": 2.0,
        "shape": "minimum-jerk",
        "lead_in": 0.0,
    },
}

DOC = {
    "run.output_dir": "directory for trace CSVs and summary.csv",
    "run.seed": "seed for all randomness (gyro noise)",
    "run.workers": "parallel processes for the condition batch",
    "plant.inertia_total": "hand+device inertia, kg m^2; also the default tip inertia",
    "plant.damping_inherent": "inherent viscous damping, N m s/rad",
    "plant.time_step": "control period and integration step, s",
    "cmg.flywheel_inertia": "flywheel inertia about its spin axis, kg m^2",
    "cmg.spin_rpm": "flywheel speed, rpm",
    "cmg.rate_limit": "gimbal rate limit, rad/s",
    "cmg.angle_min_deg": "lower gimbal stop, deg from the torque-null orientation",
    "cmg.angle_max_deg": "upper gimbal stop, deg",
    "cmg.phi0_deg": "initial gimbal angle, deg",
    "cmg.singular_sin": "|sin phi| below which the gimbal escapes the singularity",
    "imu.noise_std": "gyro white noise, rad/s (0 = noiseless)",
    "imu.quantization": "gyro LSB, rad/s (0 = off)",
    "imu.filter_cutoff": "acceleration low-pass cutoff, Hz (0 = plain difference)",
    "swing.amplitude": "swing amplitude, rad",
    "swing.frequency": "swings per second while moving, Hz",
    "swing.n_swings": "number of swings",
    "swing.rest_between": "rest after each swing, s",
    "swing.shape": "minimum-jerk or sinusoid",
    "swing.lead_in": "rest before the first swing, s",
}


@dataclass
class RunConfig:
    plant: PlantParams = field(default_factory=PlantParams)
    flywheel: FlywheelSpec = field(default_factory=FlywheelSpec)
    gimbal: CmgState = field(default_factory=CmgState)
    imu: ImuModel = field(default_factory=ImuModel)
    singular_sin: float = SINGULAR_SIN
    swing: SwingProfile = field(default_factory=SwingProfile)
    conditions: List[Condition] = field(default_factory=table1_conditions)
    output_dir: Path = Path("measure-out")
    seed: int = 0
    workers: int = 1

    def harness(self) -> HarnessConfig:
        return HarnessConfig(
            plant=self.plant,
            flywheel=self.flywheel,
            gimbal=self.gimbal,
            imu=self.imu,
            singular_sin=self.singular_sin,
        )


def _number(section: str, key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{section}.{key}: must be finite")
    return float(value)


def _section(raw: Mapping[str, Any], name: str) -> Dict[str, Any]:
    table = raw.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = sorted(set(table) - set(DEFAULTS[name]))
    if unknown:
        raise ConfigError(
            f"[{name}]: unknown key {unknown[0]!r}; allowed keys: {', '.join(DEFAULTS[name])}"
        )
    merged = dict(DEFAULTS[name])
    merged.update(table)
    return merged


def build_config(raw: Mapping[str, Any], seed: int | None = None) -> RunConfig:
    """Validate a parsed TOML mapping into a :class:`RunConfig`."""
    unknown = sorted(set(raw) - set(DEFAULTS) - {"conditions"})
    if unknown:
        raise ConfigError(f"unknown section [{unknown[0]}]; allowed: {', '.join(list(DEFAULTS) + ['conditions'])}")

    run = _section(raw, "run")
    if seed is None:
        seed = run["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"run.seed: expected a non-negative integer, got {seed!r}")
    workers = run["workers"]
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"run.workers: expected a positive integer, got {workers!r}")
    if not isinstance(run["output_dir"], str):
        raise ConfigError("run.output_dir: expected a string")

    try:
        p = _section(raw, "plant")
        plant = PlantParams(
            _number("plant", "inertia_total", p["inertia_total"]),
            _number("plant", "damping_inherent", p["damping_inherent"]),
            _number("plant", "time_step", p["time_step"]),
        )
    except ValueError as exc:
        raise ConfigError(f"[plant]: {exc}") from None

    c = _section(raw, "cmg")
    cv = {k: _number("cmg", k, v) for k, v in c.items()}
    try:
        flywheel = FlywheelSpec(cv["flywheel_inertia"], cv["spin_rpm"] * RPM_TO_RAD_S)
        gimbal = CmgState(
            phi=math.radians(cv["phi0_deg"]),
            phi_rate=0.0,
            rate_limit=cv["rate_limit"],
            angle_range=(math.radians(cv["angle_min_deg"]), math.radians(cv["angle_max_deg"])),
        )
    except ValueError as exc:
        raise ConfigError(f"[cmg]: {exc}") from None
    if not 0 <= cv["singular_sin"] < 1:
        raise ConfigError("cmg.singular_sin: must lie in [0, 1)")

    i = _section(raw, "imu")
    iv = {k: _number("imu", k, v) for k, v in i.items()}
    try:
        imu = ImuModel(
            sample_rate=1.0 / plant.time_step,
            gyro_noise_std=iv["noise_std"],
            quantization=iv["quantization"],
            filter_cutoff=iv["filter_cutoff"] or None,
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"[imu]: {exc}") from None

    s = _section(raw, "swing")
    if not isinstance(s["shape"], str):
        raise ConfigError("swing.shape: expected a string")
    if isinstance(s["n_swings"], bool) or not isinstance(s["n_swings"], int):
        raise ConfigError("swing.n_swings: expected an integer")
    try:
        swing = SwingProfile(
            amplitude=_number("swing", "amplitude", s["amplitude"]),
            frequency=_number("swing", "frequency", s["frequency"]),
            n_swings=s["n_swings"],
            rest_between=_number("swing", "rest_between", s["rest_between"]),
            shape=s["shape"],
            lead_in=_number("swing", "lead_in", s["lead_in"]),
        )
    except ValueError as exc:
        raise ConfigError(f"[swing]: {exc}") from None

    if "conditions" in raw:
        table = raw["conditions"]
        if not isinstance(table, dict) or not table:
            raise ConfigError("[conditions] must contain at least one condition table")
        conditions = []
        for name, params in table.items():
            if not isinstance(params, dict):
                raise ConfigError(f"conditions.{name}: expected a table")
            params = dict(params)
            tip = params.pop("I_tip", plant.inertia_total)
            try:
                conditions.append(Condition.from_config(normalize_name(name), params, _number(
                    f"conditions.{name}", "I_tip", tip)))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
    else:
        conditions = table1_conditions(plant.inertia_total)

    return RunConfig(
        plant=plant,
        flywheel=flywheel,
        gimbal=gimbal,
        imu=imu,
        singular_sin=cv["singular_sin"],
        swing=swing,
        conditions=conditions,
        output_dir=Path(run["output_dir"]),
        seed=seed,
        workers=workers,
    )


def load_config(path=None, seed: int | None = None) -> RunConfig:
    if path is None:
        return build_config({}, seed)
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    return build_config(raw, seed)


def _toml_value(v: Any) -> str:
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v)


def default_config_text() -> str:
    """The default configuration as commented TOML."""
    lines = ["# gyrohaptics measure configuration (all values are the defaults)", ""]
    for section, keys in DEFAULTS.items():
        lines.append(f"[{section}]")
        for key, value in keys.items():
            lines.append(f"{key} = {_toml_value(value)}  # {DOC[f'{section}.{key}']}")
        lines.append("")
    lines.append("# Omit [conditions] to run the five default conditions.")
    for cond in table1_conditions():
        lines.append(f"[conditions.{cond.name}]")
        cfg = cond.to_config()
        for key in ("delta_I", "delta_D", "k_r", "c_r"):
            lines.append(f"{key} = {_toml_value(cfg[key])}")
        lines.append("")
    return "\n".join(lines)
