import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from complab.controllers import (
    PAPER_GAINS,
    CompensatedController,
    CompensatorParams,
    DirectAdaptiveConfig,
    DirectAdaptiveController,
    ErrorState,
    MracConfig,
    MracController,
    PidController,
    PidGains,
    ReferenceModel,
    SetpointShapingController,
    PdController,
    SmcController,
    SmcGains,
    compensator_control,
    compose_total,
    direct_adaptive_control,
    mrac_control,
    mrac_update,
    payload_update,
    pid_control,
    setpoint_shaping,
    sign,
    smc_control,
)
from complab.dynamics import Step, custom_companion, reference_system, simulate, unknown_system_1

val = st.floats(-1e3, 1e3, allow_nan=False)
gain = st.floats(-100, 100, allow_nan=False)
params = st.builds(CompensatorParams, gain, gain, gain, gain)
errors = st.builds(ErrorState, val, val, val)


def test_sign_zero_is_zero():
    assert (sign(0.0), sign(-0.0), sign(3.0), sign(-1e-300)) == (0.0, 0.0, 1.0, -1.0)


def test_smc_at_rest_on_target():
    assert smc_control((5.0, 0.0), 5.0, SmcGains(5, 2, 1), 0.0, 1.0, 0.0) == 0.0


def test_smc_step_from_rest():
    # e = -10, s = -50; only the switching term survives: u = -k sign(s) = 2.
    u = smc_control((0.0, 0.0), 10.0, SmcGains(5, 2, 1), 0.0, 1.0, 0.0)
    assert u == 2.0


def test_smc_integral_and_model_terms():
    u = smc_control((1.0, 2.0), 0.0, SmcGains(5, 2, 1), f_val=3.0, g_val=2.0, s_integral=4.0)
    # e = 1, e' = 2, s = 7 -> (-3 - 10 - 2 - 4) / 2
    assert u == pytest.approx(-9.5)


def test_smc_zero_g_faults():
    with pytest.raises(ZeroDivisionError):
        smc_control((0.0, 0.0), 1.0, SmcGains(), 0.0, 0.0, 0.0)


@pytest.mark.parametrize("bad", [dict(lam=0), dict(k=-1), dict(gamma=0), dict(boundary_layer=0)])
def test_smc_gains_positive(bad):
    with pytest.raises(ValueError):
        SmcGains(**bad)


@given(val, val, val)
def test_smc_odd_in_error(x1, x2, s_int):
    g = SmcGains(5, 2, 1)
    a = smc_control((x1, x2), 0.0, g, 0.0, 1.0, s_int)
    b = smc_control((-x1, -x2), 0.0, g, 0.0, 1.0, -s_int)
    assert a == pytest.approx(-b, abs=1e-9)


def test_compensator_examples():
    assert compensator_control(ErrorState(0, 0, 0), PAPER_GAINS) == 0.0
    assert compensator_control(ErrorState(1, 0, 0), PAPER_GAINS) == 20.0
    assert compensator_control(ErrorState(1, 1, 1), PAPER_GAINS) == 39.5


@given(errors, errors, params, st.floats(-10, 10))
def test_compensator_linear(a, b, p, c):
    s = ErrorState(a.e1 + b.e1, a.e2 + b.e2, a.I + b.I)
    lhs = compensator_control(s, p)
    rhs = compensator_control(a, p) + compensator_control(b, p)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-6)
    assert compensator_control(c * a, p) == pytest.approx(c * compensator_control(a, p), rel=1e-9, abs=1e-6)


def test_compose_total_examples():
    assert compose_total(1.5, 0) == 1.5
    assert compose_total(0, -2) == -2
    assert compose_total(52, 39.5) == 91.5


def test_pid_examples():
    assert pid_control(0, 0, 0, PidGains(3, 2, 1)) == 0
    assert pid_control(3, 0, 0, PidGains(kp=2)) == 6


def test_params_vector_algebra():
    p = CompensatorParams(1, 2, 3, 4)
    assert p + p == 2 * p == CompensatorParams(2, 4, 6, 8)
    assert p - p == CompensatorParams.zero()
    assert CompensatorParams.from_dict(p.to_dict()) == p
    with pytest.raises(KeyError):
        CompensatorParams.from_dict({"kp": 1, "kx": 2})


def test_pid_half_step_consistent():
    pid = PidController(PidGains(8, 4, 1))
    a = simulate(reference_system(), pid, Step(10.0), horizon=3.0, dt=1e-3)
    b = simulate(reference_system(), pid, Step(10.0), horizon=3.0, dt=5e-4)
    assert np.abs(a.y - b.y[::2]).max() < 1e-8


def test_mrac_zero_error_freezes_theta():
    theta = np.array([1.0, -2.0, 3.0])
    out = mrac_update(theta, (0.0, 0.0), (4.0, 5.0), 6.0, (2, 2, 2), 0.01)
    assert np.array_equal(out, theta)


def test_mrac_projection_clamps():
    out = mrac_update([0, 0, 0], (1e6, 1e6), (1.0, 1.0), 1.0, (2, 2, 2), 1.0, bounds=np.array([5.0, 5.0, 5.0]))
    assert np.all(np.abs(out) <= 5.0)


def test_mrac_matching_condition():
    cfg = MracConfig()
    # Reference plant has b = 1, so theta = (0, 0, bm) reproduces the model exactly.
    assert cfg.theta0 == (0.0, 0.0, cfg.bm)
    assert mrac_control((1.0, 2.0), 3.0, cfg.theta0) == 15.0
    ctl = MracController(cfg)
    traj = simulate(reference_system(), ctl, Step(10.0), horizon=2.0)
    assert traj.ok and ctl.projections == 0
    # Same loop integrated directly: x'' = -5x - 3x' + 5r.
    ref = simulate(custom_companion(-5.0, -3.0, 5.0), _Const(10.0), Step(0.0), horizon=2.0)
    assert np.abs(traj.y - ref.y).max() < 1e-9


class _Const(PdController):
    def __init__(self, u):
        super().__init__(0.0, 0.0)
        self.u = u

    def evaluate(self, t, x1, x2, z, target):
        return self.u, 0.0, []


@given(val, val, st.floats(0, 10), st.floats(1e-4, 0.1))
def test_payload_update_frozen_at_s_zero(m_hat, phi, gamma, dt):
    assert payload_update(m_hat, 0.0, phi, gamma, dt) == m_hat


def test_payload_update_clamps():
    assert payload_update(0.0, -100.0, 1.0, 10.0, 1.0, bounds=(-5.0, 5.0)) == 5.0


def test_direct_adaptive_law_cancels_known_load():
    u, s = direct_adaptive_control((0.0, 0.0), 0.0, 2.0)
    assert (u, s) == (2.0, 0.0)


def test_direct_adaptive_perfect_model():
    load = 2.0
    plant = custom_companion(-5.0, -3.0, 1.0, bias=-load)
    cfg = DirectAdaptiveConfig(m0=load)
    traj = simulate(plant, DirectAdaptiveController(cfg), Step(0.0), horizon=2.0)
    assert np.abs(traj.y).max() < 1e-9


def test_direct_adaptive_estimate_converges():
    load = 2.0
    plant = custom_companion(-5.0, -3.0, 1.0, bias=-load)
    ctl = DirectAdaptiveController(DirectAdaptiveConfig(m0=0.0))
    traj = simulate(plant, ctl, Step(5.0), horizon=10.0)
    assert abs(traj.y[-1] - 5.0) < 0.01
    # m_hat is the controller's only state; recover it from the control at rest.
    f_ref = -5.0 * traj.y[-1] - 3.0 * traj.states[-1, 1]
    assert traj.u_total[-1] + f_ref == pytest.approx(load, abs=0.05)


def test_setpoint_shaping_examples():
    assert setpoint_shaping(50.0, ErrorState(0, 0, 0), PAPER_GAINS) == (50.0, False)
    assert setpoint_shaping(50.0, ErrorState(2, 0, 0), PAPER_GAINS) == (90.0, False)
    assert setpoint_shaping(50.0, ErrorState(2, 0, 0), PAPER_GAINS, (0.0, 60.0)) == (60.0, True)
    assert setpoint_shaping(50.0, ErrorState(-10, 0, 0), PAPER_GAINS, (0.0, 60.0)) == (0.0, True)


def test_compensated_total_is_sum():
    base = SmcController(SmcGains(boundary_layer=0.1))
    ref = ReferenceModel(SmcController(SmcGains(boundary_layer=0.1)))
    ctl = CompensatedController(base, PAPER_GAINS, ref)
    traj = simulate(unknown_system_1(seed=1), ctl, Step(10.0), horizon=1.0)
    assert traj.ok
    assert np.array_equal(traj.u_total, traj.u_base + traj.u_comp)
    assert np.abs(traj.u_comp).max() > 0


def test_compensator_off_on_reference_plant():
    base = SmcController(SmcGains(boundary_layer=0.1))
    ref = ReferenceModel(SmcController(SmcGains(boundary_layer=0.1)))
    ctl = CompensatedController(base, PAPER_GAINS, ref, integral_mode="reference")
    traj = simulate(reference_system(), ctl, Step(10.0), horizon=1.0)
    # Plant equals the model: the errors, and so u_comp, stay zero.
    assert np.abs(traj.reference - traj.states).max() < 1e-12
    assert np.abs(traj.u_comp).max() < 1e-9


def test_desired_integral_acts_without_mismatch():
    base = SmcController(SmcGains(boundary_layer=0.1))
    ref = ReferenceModel(SmcController(SmcGains(boundary_layer=0.1)))
    no_i = CompensatedController(base, CompensatorParams(20, 10, 8.5, 0), ref)
    traj = simulate(reference_system(), no_i, Step(10.0), horizon=1.0)
    assert np.abs(traj.u_comp).max() < 1e-9
    with_i = CompensatedController(base, PAPER_GAINS, ref)
    traj = simulate(reference_system(), with_i, Step(10.0), horizon=1.0)
    # I integrates x1d - x1u, which is nonzero during the transient.
    assert np.abs(traj.u_comp).max() > 1.0


def test_setpoint_shaping_keeps_inner_gains():
    inner = PdController(50.0, 8.0)
    ref = ReferenceModel(PdController(50.0, 8.0))
    ctl = SetpointShapingController(inner, CompensatorParams(0.5, 0.05, 0.05, 0), ref, (0.0, 120.0))
    traj = simulate(custom_companion(-3.0, -6.0, 1.0), ctl, Step(80.0), horizon=1.0)
    assert traj.ok
    assert (inner.kp, inner.kd) == (50.0, 8.0)
    assert not traj.u_comp.any()
    assert np.all((traj.commanded >= 0.0) & (traj.commanded <= 120.0))


def test_bad_integral_mode():
    ref = ReferenceModel(PdController(1, 1))
    with pytest.raises(ValueError):
        CompensatedController(PdController(1, 1), None, ref, integral_mode="both")


def test_smc_sign_and_tanh_agree_far_from_surface():
    hard = SmcController(SmcGains())
    soft = SmcController(SmcGains(boundary_layer=1e-3))
    a = hard.law(0.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.0)[0]
    b = soft.law(0.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.0)[0]
    assert a == pytest.approx(b)
    assert math.isclose(a, 60.0)
