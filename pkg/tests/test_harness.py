import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gyrohaptics.harness import (
    TRACE_HEADER,
    ConditionTrace,
    HarnessConfig,
    SwingProfile,
    decay_time_constant,
    export_trace,
    export_traces,
    import_trace,
    run_condition,
    run_conditions,
    swing_kinematics,
    tracking_metrics,
    write_summary,
)
from gyrohaptics.impedance import Condition, ImpedanceParams, lookup_condition, table1_conditions
from gyrohaptics.sensing import ImuModel

CLEAN = HarnessConfig().noiseless()


def _trace(des, ach, name="x"):
    des = np.asarray(des, float)
    n = len(des)
    return ConditionTrace(
        name, np.arange(n) * 1e-3, np.zeros(n), np.zeros(n), np.zeros(n),
        des, np.asarray(ach, float), np.zeros(n, bool),
    )


# swing kinematics -----------------------------------------------------------

def test_rest_gap_holds_still():
    p = SwingProfile(n_swings=2, rest_between=1.0)
    assert swing_kinematics(p, 1.5) == (0.0, 0.0, 0.0)
    assert swing_kinematics(p, 100.0) == (0.0, 0.0, 0.0)


def test_sinusoid_quarter_period():
    p = SwingProfile(0.5, 1.0, shape="sinusoid")
    th, w, _ = swing_kinematics(p, 0.25)
    assert abs(th) == pytest.approx(0.5)
    assert w == pytest.approx(0.0, abs=1e-12)


def test_lead_in_shifts_swing():
    p = SwingProfile(lead_in=0.3, shape="sinusoid")
    assert swing_kinematics(p, 0.2) == (0.0, 0.0, 0.0)
    assert swing_kinematics(p, 0.55)[0] == pytest.approx(0.5)
    assert p.swing_windows()[0] == (0.3, 1.3)
    assert p.duration == pytest.approx(0.3 + 3 * 3.0)


def test_minimum_jerk_starts_and_ends_at_rest():
    p = SwingProfile(0.5, 1.0, n_swings=1, rest_between=0.0)
    dt = 1e-5
    t = np.arange(0, 1.0 + dt / 2, dt)
    acc = np.array([swing_kinematics(p, x)[2] for x in t])
    # trapezoid integral of acceleration over the swing
    assert np.sum((acc[1:] + acc[:-1]) * dt / 2) == pytest.approx(0.0, abs=1e-8)
    assert swing_kinematics(p, 0.0)[:2] == (0.0, 0.0)
    assert swing_kinematics(p, 0.5)[0] == pytest.approx(0.5)


@given(st.floats(0.1, 1.0), st.floats(0.5, 4.0), st.floats(0.0, 0.999))
def test_minimum_jerk_derivatives_consistent(A, f, frac):
    p = SwingProfile(A, f, n_swings=1, rest_between=0.5)
    t = frac / f
    h = 1e-6 / f
    th0, w0, a0 = swing_kinematics(p, t)
    thp, wp, _ = swing_kinematics(p, t + h)
    thm, wm, _ = swing_kinematics(p, max(t - h, 0.0))
    span = (t + h) - max(t - h, 0.0)
    scale = A * f * f * 60
    assert (thp - thm) / span == pytest.approx(w0, abs=1e-4 * scale)
    assert (wp - wm) / span == pytest.approx(a0, abs=1e-3 * scale)


@given(st.floats(0.1, 1.0), st.floats(0.5, 4.0))
def test_minimum_jerk_continuous_at_boundaries(A, f):
    p = SwingProfile(A, f, n_swings=2, rest_between=0.3)
    for start, end in p.swing_windows():
        for edge in (start, end, (start + end) / 2):
            before = swing_kinematics(p, max(edge - 1e-9, 0))
            after = swing_kinematics(p, edge + 1e-9)
            for b, a in zip(before, after):
                assert a == pytest.approx(b, abs=1e-5 * A * f * f * 60)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        swing_kinematics(SwingProfile(), -0.1)


@pytest.mark.parametrize("kwargs", [dict(amplitude=0), dict(frequency=-1), dict(shape="square")])
def test_profile_validation(kwargs):
    with pytest.raises(ValueError):
        SwingProfile(**kwargs)


# metrics ----------------------------------------------------------------------

def test_metrics_perfect_tracking():
    m = tracking_metrics(_trace([0.1, -0.2, 0.3], [0.1, -0.2, 0.3]))
    assert m.rms_error == 0.0 and m.normalized_rmse == 0.0


def test_metrics_zero_output():
    m = tracking_metrics(_trace([0.05] * 10, [0.0] * 10))
    assert m.rms_error == pytest.approx(0.05)
    assert m.normalized_rmse == pytest.approx(1.0)


def test_metrics_ignore_tiny_desired():
    m = tracking_metrics(_trace([1.0, 0.001], [1.0, 0.5]))
    assert m.rms_error == 0.0


def test_metrics_empty_trace():
    with pytest.raises(ValueError):
        tracking_metrics(_trace([], []))


def test_dominant_frequency_of_sine():
    t = np.arange(0, 2.0, 1e-3)
    x = np.sin(2 * math.pi * 2.0 * t + 0.3)
    tr = ConditionTrace("e", t, t * 0, t * 0, t * 0, -x, -x, np.zeros(len(t), bool),
                        elastic_torque=x, elastic=True, swing_end=0.0)
    assert tracking_metrics(tr).dominant_oscillation_hz == pytest.approx(2.0, rel=1e-3)


def test_decay_constant_of_damped_sine():
    t = np.arange(0, 6.0, 1e-3)
    x = np.exp(-t / 1.7) * np.sin(2 * math.pi * 3 * t)
    assert decay_time_constant(t, x) == pytest.approx(1.7, rel=0.01)
    assert decay_time_constant(t, np.sin(t)) is None


# closed loop ------------------------------------------------------------------

def test_zero_impedance_renders_nothing():
    tr = run_condition(Condition("none", ImpedanceParams()), SwingProfile(n_swings=1), HarnessConfig())
    assert np.all(tr.tau_desired == 0) and np.all(tr.tau_achieved == 0)
    assert tr.metrics.rms_error == 0.0


def test_desired_torque_is_law_on_recorded_signals():
    for cond in table1_conditions()[:4]:
        tr = run_condition(cond, SwingProfile(n_swings=1), HarnessConfig(imu=ImuModel(seed=3)))
        p = cond.params
        law = -p.delta_inertia * tr.omega_dot - p.delta_damping * tr.omega
        np.testing.assert_array_equal(tr.tau_desired, law)


def test_elastic_desired_is_minus_bend_torque():
    tr = run_condition(lookup_condition("elasticity-increase"), SwingProfile(n_swings=1), CLEAN)
    np.testing.assert_array_equal(tr.tau_desired, -tr.elastic_torque)


def test_increased_inertia_changes_sign_within_sinusoid_swing():
    p = SwingProfile(n_swings=1, shape="sinusoid", lead_in=0.1)
    tr = run_condition(lookup_condition("increased-inertia"), p, CLEAN)
    start, end = p.swing_windows()[0]
    inside = (tr.t > start + 0.01) & (tr.t < end - 0.01)
    d = tr.tau_desired[inside]
    assert np.any(d > 0) and np.any(d < 0)


def test_elastic_ring_frequency():
    p = SwingProfile(n_swings=1, frequency=2.0, lead_in=0.5, rest_between=6.0)
    tr = run_condition(lookup_condition("elasticity-increase"), p, CLEAN)
    assert tr.metrics.dominant_oscillation_hz == pytest.approx(2.0, abs=0.1)


def test_elastic_ring_persists_and_decays():
    p = SwingProfile(n_swings=1, frequency=2.0, lead_in=0.5, rest_between=6.0)
    tr = run_condition(lookup_condition("elasticity-increase"), p, CLEAN)
    after = tr.t >= p.last_swing_end
    a = np.abs(tr.tau_desired[after])
    pk = [a[i] for i in range(1, len(a) - 1) if a[i] > a[i - 1] and a[i] >= a[i + 1]]
    assert len(pk) > 15
    assert all(y < x for x, y in zip(pk, pk[1:]))


@settings(max_examples=15)
@given(st.sampled_from(["increased-inertia", "decreased-inertia", "damping-increase", "damping-decrease"]),
       st.floats(0.1, 0.5), st.floats(0.5, 1.5))
def test_within_envelope_fidelity(name, A, f):
    p = SwingProfile(A, f, n_swings=1, rest_between=0.2)
    tr = run_condition(lookup_condition(name), p, CLEAN)
    if np.all(np.abs(tr.tau_desired) <= 0.8 * tr.envelope):
        assert tr.metrics.normalized_rmse <= 0.10


def test_divergence_truncates_trace():
    cond = Condition("floppy", ImpedanceParams(k_r=1e-4, c_r=0.0))
    cfg = HarnessConfig(divergence_bound=0.05).noiseless()
    tr = run_condition(cond, SwingProfile(n_swings=1), cfg)
    assert not tr.completed and "bound" in tr.failure
    assert 0 < len(tr) < int(SwingProfile(n_swings=1).duration / 1e-3)


def test_mismatched_imu_rate_rejected():
    with pytest.raises(ValueError, match="sample_rate"):
        HarnessConfig(imu=ImuModel(sample_rate=500))


def test_with_time_step_keeps_rates_matched():
    cfg = HarnessConfig().with_time_step(5e-4)
    assert cfg.imu.sample_rate == pytest.approx(2000)


def test_batch_is_seeded_and_reproducible():
    conds = table1_conditions()[:2]
    p = SwingProfile(n_swings=1, rest_between=0.2)
    a = run_conditions(conds, p, HarnessConfig())
    b = run_conditions(conds, p, HarnessConfig())
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.omega, y.omega)
    # distinct noise streams per condition
    assert not np.array_equal(a[0].omega, a[1].omega)


def test_parallel_batch_matches_serial():
    conds = table1_conditions()
    p = SwingProfile(n_swings=1, rest_between=0.2)
    serial = run_conditions(conds, p, HarnessConfig())
    parallel = run_conditions(conds, p, HarnessConfig(), workers=2)
    for x, y in zip(serial, parallel):
        np.testing.assert_array_equal(x.tau_achieved, y.tau_achieved)


# CSV --------------------------------------------------------------------------

def test_empty_trace_exports_header_only(tmp_path):
    path = export_trace(_trace([], []), tmp_path / "e.csv")
    assert path.read_bytes() == (",".join(TRACE_HEADER) + "\n").encode()


def test_trace_round_trip_bit_exact(tmp_path):
    tr = run_condition(lookup_condition("damping-decrease"), SwingProfile(n_swings=1, rest_between=0.1),
                       HarnessConfig())
    back = import_trace(export_trace(tr, tmp_path / "d.csv"))
    for col in ("t", "theta", "omega", "omega_dot", "tau_desired", "tau_achieved", "saturated"):
        np.testing.assert_array_equal(getattr(back, col), getattr(tr, col))
    assert back.name == "d"


def test_trace_file_format(tmp_path):
    tr = _trace([0.1, 1 / 3], [0.0, 0.2])
    raw = export_trace(tr, tmp_path / "f.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "t,theta,omega,omega_dot,tau_desired,tau_achieved,saturated"
    assert "0.3333333333333333" in lines[2]


def test_import_rejects_wrong_header(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        import_trace(f)


def test_batch_export_names(tmp_path):
    traces = run_conditions(table1_conditions(), SwingProfile(n_swings=1, rest_between=1.5), CLEAN)
    paths = export_traces(traces, tmp_path)
    assert sorted(p.name for p in paths) == sorted(f"{c.name}.csv" for c in table1_conditions())
    summary = write_summary(traces, tmp_path / "summary.csv").read_text().splitlines()
    assert len(summary) == 6
    elastic_row = [r for r in summary if r.startswith("elasticity-increase")][0].split(",")
    assert float(elastic_row[6]) > 0
