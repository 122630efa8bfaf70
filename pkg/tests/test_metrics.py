import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from complab.dynamics import Trajectory
from complab.metrics import (
    Diagnosis,
    MetricsFault,
    ResponseMetrics,
    compare_positions,
    compare_responses,
    diagnose,
    lead_factor,
    step_metrics,
    step_response_metrics,
    tracking_stats,
)


def make_traj(t, y, target=1.0, ref=None):
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    z = np.zeros_like(t)
    states = np.column_stack([y, np.gradient(y, t) if len(t) > 1 else z])
    reference = None if ref is None else np.column_stack([ref, np.zeros_like(t)])
    dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
    return Trajectory(dt, t, states, z, z, z, np.full_like(t, target), reference=reference)


def first_order(dt=1e-3, horizon=8.0):
    t = np.arange(int(round(horizon / dt)) + 1) * dt
    return t, 1.0 - np.exp(-t)


def second_order(zeta, wn=3.0, dt=1e-3, horizon=8.0):
    t = np.arange(int(round(horizon / dt)) + 1) * dt
    wd = wn * math.sqrt(1 - zeta**2)
    y = 1 - np.exp(-zeta * wn * t) * (np.cos(wd * t) + zeta / math.sqrt(1 - zeta**2) * np.sin(wd * t))
    return t, y


def metrics(**kw):
    base = dict(
        peak_overshoot=0.0,
        settling_time=1.0,
        steady_state_error=0.0,
        rise_time=0.5,
        max_error=1.0,
        min_error=0.0,
        amplitude=1.0,
        delay_time=0.3,
    )
    base.update(kw)
    return ResponseMetrics(**base)


def test_instant_step():
    t = np.linspace(0, 1, 101)
    m = step_response_metrics(t, np.ones_like(t), 1.0, initial=0.0)
    assert (m.peak_overshoot, m.settling_time, m.steady_state_error) == (0.0, 0.0, 0.0)


def test_first_order_settling():
    m = step_metrics(make_traj(*first_order()))
    assert m.peak_overshoot == 0.0
    assert m.settling_time == pytest.approx(math.log(50), abs=1e-3)
    assert m.rise_time == pytest.approx(math.log(9), abs=1e-3)
    assert m.delay_time == pytest.approx(math.log(2), abs=1e-3)
    assert m.settled


def test_peak_overshoot_twenty_percent():
    t = np.linspace(0, 4, 401)
    y = np.where(t < 1, 1.2 * t, 1.0 + 0.2 * np.exp(-5 * (t - 1)))
    m = step_response_metrics(t, y, 1.0)
    assert m.peak_overshoot == pytest.approx(20.0, abs=1e-9)


def test_second_order_overshoot_formula():
    zeta = 0.3
    m = step_metrics(make_traj(*second_order(zeta)))
    expected = 100 * math.exp(-zeta * math.pi / math.sqrt(1 - zeta**2))
    assert m.peak_overshoot == pytest.approx(expected, abs=0.01)


def test_unsettled_flag():
    t = np.linspace(0, 1, 101)
    m = step_response_metrics(t, 0.5 * t, 1.0)
    assert not m.settled
    assert m.settling_time == 1.0
    assert math.isinf(m.rise_time) or m.rise_time > 0


def test_negative_step_normalised():
    t, y = first_order()
    up = step_response_metrics(t, 5 * y, 5.0)
    down = step_response_metrics(t, -5 * y, -5.0)
    assert up.settling_time == down.settling_time
    assert up.peak_overshoot == down.peak_overshoot


def test_faults():
    with pytest.raises(MetricsFault):
        step_response_metrics([], [], 1.0)
    with pytest.raises(MetricsFault):
        step_response_metrics([0, 1], [1, 1], 1.0)
    with pytest.raises(MetricsFault):
        step_metrics(make_traj([0.0, 1.0], [0.0, 1.0]), channel="reference")


@pytest.mark.parametrize("factor", [2, 4, 10])
def test_resampling_invariance(factor):
    t, y = second_order(0.4)
    fine = np.linspace(t[0], t[-1], (len(t) - 1) * factor + 1)
    a = step_response_metrics(t, y, 1.0)
    b = step_response_metrics(fine, np.interp(fine, t, y), 1.0)
    for name in ("peak_overshoot", "settling_time", "rise_time", "delay_time", "max_error", "min_error"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), abs=1e-6), name
    assert a.steady_state_error == pytest.approx(b.steady_state_error, abs=1e-6)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50))
def test_compare_identical_is_zero(y):
    s = compare_positions(y, y)
    assert (s.rmse, s.max_abs, s.final_gap) == (0.0, 0.0, 0.0)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50), st.floats(-10, 10))
def test_compare_constant_offset(y, delta):
    y = np.asarray(y)
    s = compare_positions(y + delta, y)
    assert s.rmse == pytest.approx(abs(delta), abs=1e-9)
    assert s.final_gap == pytest.approx(delta, abs=1e-9)


@given(
    st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=1, max_size=60),
)
def test_compare_brute_force(pairs):
    a = [p[0] for p in pairs]
    b = [p[1] for p in pairs]
    s = compare_positions(a, b)
    brute = math.sqrt(sum((x - y) ** 2 for x, y in pairs) / len(pairs))
    assert s.rmse == pytest.approx(brute, rel=1e-9, abs=1e-9)
    assert s.rmse >= 0
    assert s.max_abs >= abs(s.final_gap) - 1e-12
    assert s.max_abs >= s.rmse - 1e-12
    # Symmetric up to the sign of the final gap.
    r = compare_positions(b, a)
    assert (r.rmse, r.max_abs, r.final_gap) == (s.rmse, s.max_abs, -s.final_gap)


def test_compare_shape_mismatch():
    with pytest.raises(ValueError):
        compare_positions([1, 2], [1, 2, 3])


def test_compare_responses_resamples():
    t, y = first_order(dt=1e-3, horizon=2.0)
    tc, yc = first_order(dt=2e-3, horizon=2.0)
    s = compare_responses(make_traj(t, y), make_traj(tc, yc))
    assert s.rmse < 1e-6


def test_tracking_stats_uses_reference_channel():
    t, y = first_order(horizon=2.0)
    s = tracking_stats(make_traj(t, y, ref=y + 0.5))
    assert s.rmse == pytest.approx(0.5)


def test_step_metrics_reference_channel():
    t, y = first_order()
    traj = make_traj(t, y, ref=y)
    assert step_metrics(traj, channel="reference") == step_metrics(traj)


def test_diagnose_identical_is_matched():
    m = metrics()
    assert diagnose(m, m) == {Diagnosis.MATCHED}


def test_diagnose_overshoot():
    assert Diagnosis.OVERSHOOTING in diagnose(metrics(), metrics(peak_overshoot=30.0))


def test_diagnose_slow_with_bias():
    labels = diagnose(metrics(), metrics(rise_time=1.0, steady_state_error=0.03))
    assert {Diagnosis.SLUGGISH, Diagnosis.STEADY_STATE_BIAS} <= labels
    assert Diagnosis.MATCHED not in labels


def test_diagnose_lead_counts_as_underdamped():
    ref, unk = metrics(delay_time=0.4), metrics(delay_time=0.2)
    assert lead_factor(ref, unk) == 2.0
    assert diagnose(ref, unk) == {Diagnosis.OVERSHOOTING}
    assert math.isnan(lead_factor(ref, metrics(delay_time=0.0)))
    # An unknown that never reaches 50% does not lead.
    assert lead_factor(ref, metrics(delay_time=math.inf)) == 0.0


@given(st.floats(0, 100), st.floats(0.01, 5), st.floats(-1, 1), st.floats(0.01, 5))
def test_diagnose_never_empty(os, rise, sse, delay):
    labels = diagnose(metrics(), metrics(peak_overshoot=os, rise_time=rise, steady_state_error=sse, delay_time=delay))
    assert labels
    assert (Diagnosis.MATCHED in labels) == (labels == {Diagnosis.MATCHED})


def test_metrics_roundtrip():
    m = step_metrics(make_traj(*first_order()))
    assert ResponseMetrics.from_dict(m.to_dict()) == m
