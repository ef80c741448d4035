"""
Closed-loop torque-rendering runs.

Each control tick::

    prescribed swing -> gyro sample -> acceleration estimate
        -> impedance law (desired torque) -> inverse gimbal rate
        -> gimbal step -> forward law (achieved torque)

The hand trajectory is prescribed: the human is the position source and the
device torque does not perturb it.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .cmg import (
    CmgState,
    FlywheelSpec,
    SINGULAR_SIN,
    forward_torque,
    inverse_gimbal_rate,
    step_gimbal,
    torque_envelope,
)
from .impedance import (
    DEFAULT_DIVERGENCE_BOUND,
    Condition,
    ElasticDivergence,
    ImpedanceController,
)
from .plant import PlantParams
from .sensing import AccelEstimator, ImuModel, sample_gyro

SHAPES = ("sinusoid", "minimum-jerk")
TRACE_HEADER = ("t", "theta", "omega", "omega_dot", "tau_desired", "tau_achieved", "saturated")


# ---------------------------------------------------------------------------
# Swing kinematics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SwingProfile:
    """Repeated wrist swings separated by rests.

    One swing lasts ``1/frequency`` seconds and is followed by
    ``rest_between`` seconds at rest; ``lead_in`` seconds of rest precede the
    first swing.

    ``sinusoid``: ``theta = A sin(2 pi f t)`` over one full period. Smooth
    inside the swing, but the velocity jumps at the swing boundaries.

    ``minimum-jerk``: out to ``A`` and back, each stroke a minimum-jerk
    quintic lasting half the period. Position, velocity and acceleration are
    continuous everywhere.
    """

    amplitude: float = 0.5
    frequency: float = 1.0
    n_swings: int = 3
    rest_between: float = 2.0
    shape: str = "minimum-jerk"
    lead_in: float = 0.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")
        if not self.frequency > 0:
            raise ValueError(f"frequency must be > 0, got {self.frequency}")
        if self.n_swings < 0:
            raise ValueError(f"n_swings must be >= 0, got {self.n_swings}")
        if self.rest_between < 0 or self.lead_in < 0:
            raise ValueError("rest_between and lead_in must be >= 0")
        if self.shape not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}, got {self.shape!r}")

    @property
    def swing_duration(self) -> float:
        return 1.0 / self.frequency

    @property
    def duration(self) -> float:
        return self.lead_in + self.n_swings * (self.swing_duration + self.rest_between)

    def swing_windows(self) -> List[Tuple[float, float]]:
        """(start, end) times of each swing."""
        cycle = self.swing_duration + self.rest_between
        return [
            (self.lead_in + i * cycle, self.lead_in + i * cycle + self.swing_duration)
            for i in range(self.n_swings)
        ]

    @property
    def last_swing_end(self) -> float:
        windows = self.swing_windows()
        return windows[-1][1] if windows else self.lead_in


def _min_jerk(s: float) -> Tuple[float, float, float]:
    """Normalized minimum-jerk stroke and its first two derivatives in s."""
    s2 = s * s
    s3 = s2 * s
    return (
        10 * s3 - 15 * s3 * s + 6 * s3 * s2,
        30 * s2 - 60 * s3 + 30 * s2 * s2,
        60 * s - 180 * s2 + 120 * s3,
    )


def swing_kinematics(profile: SwingProfile, t: float) -> Tuple[float, float, float]:
    """Analytic ``(theta, omega, omega_dot)`` of the hand at time ``t``."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    u = t - profile.lead_in
    if u < 0:
        return 0.0, 0.0, 0.0
    period = profile.swing_duration
    cycle = period + profile.rest_between
    i = int(u // cycle)
    if i >= profile.n_swings:
        return 0.0, 0.0, 0.0
    u -= i * cycle
    if u >= period:
        return 0.0, 0.0, 0.0

    A = profile.amplitude
    if profile.shape == "sinusoid":
        w = 2.0 * math.pi * profile.frequency
        return A * math.sin(w * u), A * w * math.cos(w * u), -A * w * w * math.sin(w * u)

    half = period / 2.0
    if u < half:
        p, dp, ddp = _min_jerk(u / half)
        return A * p, A * dp / half, A * ddp / half**2
    p, dp, ddp = _min_jerk((u - half) / half)
    return A * (1.0 - p), -A * dp / half, -A * ddp / half**2


# ---------------------------------------------------------------------------
# Configuration and traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HarnessConfig:
    """Everything a run needs besides the condition and swing."""

    plant: PlantParams = field(default_factory=PlantParams)
    flywheel: FlywheelSpec = field(default_factory=FlywheelSpec)
    gimbal: CmgState = field(default_factory=CmgState)
    imu: ImuModel = field(default_factory=ImuModel)
    singular_sin: float = SINGULAR_SIN
    divergence_bound: float = DEFAULT_DIVERGENCE_BOUND

    def __post_init__(self):
        if not math.isclose(self.imu.sample_rate * self.plant.time_step, 1.0, rel_tol=1e-9):
            raise ValueError(
                f"imu.sample_rate ({self.imu.sample_rate} Hz) must match the control rate "
                f"1/time_step ({1.0 / self.plant.time_step} Hz)"
            )

    @property
    def dt(self) -> float:
        return self.plant.time_step

    def with_time_step(self, dt: float) -> "HarnessConfig":
        imu = self.imu
        cutoff = imu.filter_cutoff
        return replace(
            self,
            plant=replace(self.plant, time_step=dt),
            imu=ImuModel(1.0 / dt, imu.gyro_noise_std, imu.quantization, cutoff, imu.seed),
        )

    def noiseless(self) -> "HarnessConfig":
        imu = self.imu
        return replace(
            self, imu=ImuModel(imu.sample_rate, 0.0, 0.0, imu.filter_cutoff, imu.seed)
        )


@dataclass
class TrackingMetrics:
    rms_error: float
    peak_desired: float
    normalized_rmse: float
    dominant_oscillation_hz: Optional[float] = None
    decay_time_constant_s: Optional[float] = None
    saturated_fraction: float = 0.0
    max_envelope_ratio: float = 0.0


@dataclass
class ConditionTrace:
    """Time series of one run.

    ``omega`` and ``omega_dot`` are the *sensed* signals fed to the impedance
    law, so ``tau_desired`` is exactly the law applied to the recorded
    columns. ``theta`` is the prescribed hand angle.
    """

    name: str
    t: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    omega_dot: np.ndarray
    tau_desired: np.ndarray
    tau_achieved: np.ndarray
    saturated: np.ndarray
    phi: Optional[np.ndarray] = None
    envelope: Optional[np.ndarray] = None
    elastic_torque: Optional[np.ndarray] = None
    elastic: bool = False
    swing_end: Optional[float] = None
    completed: bool = True
    failure: str = ""
    metrics: Optional[TrackingMetrics] = None

    def __len__(self) -> int:
        return len(self.t)


def _zero_crossings(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Linearly interpolated sign-change times; exact zeros are skipped."""
    nz = x != 0
    t, x = t[nz], x[nz]
    if len(x) < 2:
        return np.empty(0)
    idx = np.nonzero(np.signbit(x[1:]) != np.signbit(x[:-1]))[0]
    x0, x1 = x[idx], x[idx + 1]
    return t[idx] + (t[idx + 1] - t[idx]) * x0 / (x0 - x1)


def zero_crossing_frequency(t: Sequence[float], x: Sequence[float]) -> Optional[float]:
    """Oscillation frequency from zero crossings (two per cycle)."""
    crossings = _zero_crossings(np.asarray(t, float), np.asarray(x, float))
    if len(crossings) < 2:
        return None
    span = crossings[-1] - crossings[0]
    return (len(crossings) - 1) / (2.0 * span)


def decay_time_constant(t: Sequence[float], x: Sequence[float]) -> Optional[float]:
    """Envelope time constant from a log-linear fit through the |x| extrema."""
    t = np.asarray(t, float)
    a = np.abs(np.asarray(x, float))
    if len(a) < 3:
        return None
    inner = np.nonzero((a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:]) & (a[1:-1] > 0))[0] + 1
    if len(inner) < 3:
        return None
    slope = np.polyfit(t[inner], np.log(a[inner]), 1)[0]
    if slope >= 0:
        return None
    return -1.0 / slope


def tracking_metrics(trace: ConditionTrace) -> TrackingMetrics:
    """Tracking error of achieved vs desired torque.

    The RMS runs over samples where ``|tau_desired|`` exceeds 1 % of its
    peak. For elastic conditions the ring-down after the last swing yields
    the dominant oscillation frequency and envelope time constant.
    """
    if len(trace) == 0:
        raise ValueError("tracking_metrics needs a non-empty trace")
    des = np.asarray(trace.tau_desired, float)
    ach = np.asarray(trace.tau_achieved, float)
    peak = float(np.max(np.abs(des)))
    mask = np.abs(des) > 0.01 * peak
    rms = float(np.sqrt(np.mean((ach[mask] - des[mask]) ** 2))) if mask.any() else 0.0
    m = TrackingMetrics(
        rms_error=rms,
        peak_desired=peak,
        normalized_rmse=rms / peak if peak > 0 else 0.0,
        saturated_fraction=float(np.mean(trace.saturated)),
    )
    if trace.envelope is not None:
        env = np.asarray(trace.envelope)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(env > 0, np.abs(ach) / env, np.where(ach == 0, 0.0, np.inf))
        m.max_envelope_ratio = float(np.max(ratio))
    if trace.elastic:
        te = trace.elastic_torque if trace.elastic_torque is not None else -des
        start = trace.swing_end if trace.swing_end is not None else 0.0
        seg = np.asarray(trace.t) >= start
        m.dominant_oscillation_hz = zero_crossing_frequency(trace.t[seg], te[seg])
        m.decay_time_constant_s = decay_time_constant(trace.t[seg], te[seg])
    return m


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def run_condition(
    condition: Condition,
    profile: SwingProfile,
    config: HarnessConfig | None = None,
    duration: float | None = None,
) -> ConditionTrace:
    """Render ``condition`` while the hand follows ``profile``.

    An elastic divergence truncates the trace (``completed=False``).
    """
    config = config or HarnessConfig()
    dt = config.dt
    duration = profile.duration if duration is None else duration
    n = int(round(duration / dt)) + 1

    imu = replace(config.imu)  # fresh RNG from the configured seed
    estimator = AccelEstimator(imu)
    controller = ImpedanceController(condition.params, dt, config.divergence_bound)
    spec = config.flywheel
    gimbal = config.gimbal
    limit = gimbal.rate_limit

    cols = {k: [] for k in ("t", "theta", "omega", "omega_dot", "des", "ach", "sat", "phi", "env", "te")}
    completed, failure = True, ""
    for k in range(n):
        t = k * dt
        theta, omega_true, _ = swing_kinematics(profile, t)
        omega = sample_gyro(omega_true, imu)
        alpha = estimator.update(omega)
        try:
            tau_des = controller.update(omega, alpha)
        except ElasticDivergence as exc:
            completed, failure = False, f"t={t:.6g} s: {exc}"
            break
        rate, saturated = inverse_gimbal_rate(tau_des, gimbal.phi, spec, limit, config.singular_sin)
        gimbal = step_gimbal(gimbal, rate, dt)
        if gimbal.phi_rate != rate:
            saturated = True  # hit an angle stop
        tau_ach = forward_torque(gimbal, spec)

        cols["t"].append(t)
        cols["theta"].append(theta)
        cols["omega"].append(omega)
        cols["omega_dot"].append(alpha)
        cols["des"].append(tau_des)
        cols["ach"].append(tau_ach)
        cols["sat"].append(saturated)
        cols["phi"].append(gimbal.phi)
        cols["env"].append(torque_envelope(gimbal.phi, spec, limit))
        cols["te"].append(controller.last_Te)

    trace = ConditionTrace(
        name=condition.name,
        t=np.array(cols["t"], float),
        theta=np.array(cols["theta"], float),
        omega=np.array(cols["omega"], float),
        omega_dot=np.array(cols["omega_dot"], float),
        tau_desired=np.array(cols["des"], float),
        tau_achieved=np.array(cols["ach"], float),
        saturated=np.array(cols["sat"], bool),
        phi=np.array(cols["phi"], float),
        envelope=np.array(cols["env"], float),
        elastic_torque=np.array(cols["te"], float),
        elastic=condition.params.is_elastic,
        swing_end=profile.last_swing_end,
        completed=completed,
        failure=failure,
    )
    if len(trace):
        trace.metrics = tracking_metrics(trace)
    return trace


def _seeded(config: HarnessConfig, index: int) -> HarnessConfig:
    seed = int(np.random.SeedSequence([config.imu.seed, index]).generate_state(1)[0])
    return replace(config, imu=replace(config.imu, seed=seed))


def _run_one(args):
    return run_condition(*args)


def run_conditions(
    conditions: Iterable[Condition],
    profile: SwingProfile,
    config: HarnessConfig | None = None,
    workers: int = 1,
) -> List[ConditionTrace]:
    """Run several conditions; each gets its own RNG stream derived from the seed."""
    config = config or HarnessConfig()
    jobs = [(c, profile, _seeded(config, i)) for i, c in enumerate(conditions)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def export_trace(trace: ConditionTrace, path) -> Path:
    """Write the trace CSV (UTF-8, LF, shortest round-trip float repr)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in zip(trace.t, trace.theta, trace.omega, trace.omega_dot,
                       trace.tau_desired, trace.tau_achieved, trace.saturated):
            w.writerow([repr(float(v)) for v in row[:6]] + [int(bool(row[6]))])
    return path


def import_trace(path, name: str | None = None) -> ConditionTrace:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_HEADER:
        raise ValueError(f"{path}: expected header {','.join(TRACE_HEADER)}")
    body = rows[1:]
    data = np.array([[float(v) for v in r[:6]] for r in body], float).reshape(len(body), 6)
    sat = np.array([r[6] not in ("0", "false", "False") for r in body], bool)
    return ConditionTrace(
        name=name or path.stem,
        t=data[:, 0], theta=data[:, 1], omega=data[:, 2], omega_dot=data[:, 3],
        tau_desired=data[:, 4], tau_achieved=data[:, 5], saturated=sat,
    )


def export_traces(traces: Sequence[ConditionTrace], directory) -> List[Path]:
    directory = Path(directory)
    return [export_trace(tr, directory / f"{tr.name}.csv") for tr in traces]


SUMMARY_HEADER = (
    "condition", "completed", "samples", "rms_error", "peak_desired", "normalized_rmse",
    "dominant_oscillation_hz", "decay_time_constant_s", "saturated_fraction",
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_summary(traces: Sequence[ConditionTrace], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for tr in traces:
            m = tr.metrics
            w.writerow([
                tr.name, _fmt(tr.completed), _fmt(len(tr)),
                _fmt(m.rms_error if m else None), _fmt(m.peak_desired if m else None),
                _fmt(m.normalized_rmse if m else None),
                _fmt(m.dominant_oscillation_hz if m else None),
                _fmt(m.decay_time_constant_s if m else None),
                _fmt(m.saturated_fraction if m else None),
            ])
    return path
