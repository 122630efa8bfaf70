import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given
from hypothesis import strategies as st

from complab.controllers import PAPER_GAINS, CompensatorParams
from complab.dynamics import Step, Trajectory, custom_companion, unknown_system_1
from complab.stability import (
    BoundEnvelope,
    Region,
    backsolve_input_caps,
    delta_bound,
    delta_fixed,
    derive_region,
    lyapunov_value,
    paper_envelope,
    region_check,
    region_check_worst_case,
    region_map,
    vdot,
    vdot_coefficients,
    vdot_expanded,
    vdot_worst_case,
    verify_descent,
)

val = st.floats(-100, 100, allow_nan=False)
pos = st.floats(0, 100, allow_nan=False)
gain = st.floats(-50, 50, allow_nan=False)
params = st.builds(CompensatorParams, gain, gain, gain, gain)


def envelope(**caps):
    return BoundEnvelope((-6.5, -0.5), (-6.0, 0.0), (1.0, 1.0), **caps)


def test_delta_fixed_zero():
    assert delta_fixed((0, 0), (0, 0), 0, 0, 0, coefficients=(-4, -3, 2)) == 0


def test_delta_fixed_reference_position():
    assert delta_fixed((0, 0), (1, 0), 0, 0, 0, coefficients=(-4, -3, 2)) == -5


@given(val, val, val, val, val, val, st.floats(-0.25, 0.25))
def test_delta_fixed_term_sum(x1u, x2u, x1r, x2r, ub, ur, d):
    spec = unknown_system_1()
    a21, a22, b = spec.coefficients(x1u, x2u)
    terms = [a21 * x1u, a22 * x2u, -5 * x1r, -3 * x2r, b * ub, -ur, d]
    got = delta_fixed((x1u, x2u), (x1r, x2r), ub, ur, d, spec=spec)
    assert got == pytest.approx(sum(terms), abs=1e-9)


def test_delta_fixed_needs_coefficients():
    with pytest.raises(ValueError):
        delta_fixed((0, 0), (0, 0), 0, 0, 0)


def test_delta_bound_examples():
    assert delta_bound(envelope(d_max=0.25)) == 0.25
    assert delta_bound(envelope(d_max=0.0, x1r_max=1.0)) == 5.0
    assert delta_bound(paper_envelope()) == pytest.approx(274.45, abs=1e-9)


@given(pos, pos, pos, pos, pos, pos, pos)
def test_delta_bound_monotone(d, x1u, x2u, x1r, x2r, ub, ur):
    base = envelope(d_max=d, x1u_max=x1u, x2u_max=x2u, x1r_max=x1r, x2r_max=x2r, ubase_max=ub, ur_max=ur)
    bigger = envelope(d_max=d + 1, x1u_max=x1u + 1, x2u_max=x2u, x1r_max=x1r, x2r_max=x2r, ubase_max=ub, ur_max=ur)
    assert delta_bound(bigger) > delta_bound(base)


@given(val, val, val, val, val, val, st.floats(-0.25, 0.25))
def test_delta_bound_dominates(x1u, x2u, x1r, x2r, ub, ur, d):
    env = BoundEnvelope((-6.5, -0.5), (-6.0, 0.0), (0.0, 4.0), 0.25, 100, 100, 100, 100, 100, 100)
    for b in (0.0, 2.0, 4.0):
        assert abs(delta_fixed((x1u, x2u), (x1r, x2r), ub, ur, d, coefficients=(-6.5, -6.0, b))) <= delta_bound(env)


def test_envelope_validation():
    with pytest.raises(ValueError):
        BoundEnvelope((1.0, 0.0), (0, 0), (1, 1), 0.0)
    with pytest.raises(ValueError):
        envelope(d_max=-1.0)


def test_backsolve_reproduces_paper_constant():
    u = backsolve_input_caps(274.45, (-6.5, -0.5), (-6.0, 0.0), (1.0, 1.0), 0.25, 10.0, 10.0)
    env = envelope(d_max=0.25, x1u_max=10, x2u_max=10, x1r_max=10, x2r_max=10, ubase_max=u, ur_max=u)
    assert delta_bound(env) == pytest.approx(274.45)
    with pytest.raises(ValueError):
        backsolve_input_caps(1.0, (-6.5, -0.5), (-6.0, 0.0), (1.0, 1.0), 0.25, 10.0, 10.0)


@given(val, val, val, params, st.floats(0, 4))
def test_vdot_vanishes_on_e2_zero(e1, I, delta, p, b):
    assert vdot(e1, 0.0, I, delta, p, b) == 0.0


def test_vdot_paper_example():
    # e2 (-19 e1 - 18.5 e2) at e1 = e2 = 1 plus nothing else.
    assert vdot(1.0, 1.0, 0.0, 0.0, PAPER_GAINS, 1.0) == pytest.approx(-37.5)
    assert vdot_expanded(1.0, 1.0, 0.0, 0.0, PAPER_GAINS, 1.0) == pytest.approx(-37.5)


@given(val, val, val, val, params, st.floats(0, 4))
def test_vdot_forms_agree(e1, e2, I, delta, p, b):
    a = vdot(e1, e2, I, delta, p, b)
    c = vdot_expanded(e1, e2, I, delta, p, b)
    assert a == pytest.approx(c, rel=1e-9, abs=1e-6)


def test_vdot_symbolic_cross_check():
    e1, e2, I, D = sp.symbols("e1 e2 I Delta")
    p = CompensatorParams(*(sp.Rational(str(v)) for v in PAPER_GAINS.as_tuple()))
    diff = sp.expand(vdot(e1, e2, I, D, p, 1) - vdot_expanded(e1, e2, I, D, p, 1))
    assert diff == 0
    assert vdot_coefficients(PAPER_GAINS) == (-19, sp.Rational(-37, 2), -1)


@given(val, val, st.floats(0, 300), params, st.floats(0, 4), st.floats(-1, 1))
def test_worst_case_bounds_vdot(e1, e2, dmax, p, b, frac):
    assert vdot(e1, e2, 0.0, frac * dmax, p, b) <= vdot_worst_case(e1, e2, 0.0, dmax, p, b) + 1e-6


def test_paper_region_constants():
    r = derive_region(PAPER_GAINS, paper_envelope())
    assert r.c1 == pytest.approx(19 / 18.5)
    assert round(r.c1, 2) == 1.03
    assert r.threshold == pytest.approx(274.45 / 18.5)
    assert round(r.threshold) == 15


def test_region_examples():
    r = derive_region(PAPER_GAINS, paper_envelope())
    assert region_check(20, 5, r) is Region.CONVERGING
    assert region_check(-20, -5, r) is Region.CONVERGING
    assert region_check(0, 0, r) is Region.BOUNDARY
    assert region_check(0, 1, r) is Region.INACTIVE


@given(val, val)
def test_region_antisymmetric(e1, e2):
    r = derive_region(PAPER_GAINS, paper_envelope())
    assert region_check(e1, e2, r) is region_check(-e1, -e2, r)


@given(val, val)
def test_region_implies_descent(e1, e2):
    env = paper_envelope()
    r = derive_region(PAPER_GAINS, env)
    assume(region_check(e1, e2, r) is Region.CONVERGING)
    assert vdot_worst_case(e1, e2, 0.0, delta_bound(env), PAPER_GAINS, 1.0) < 0


@given(val, val)
def test_worst_case_region_is_subset(e1, e2):
    env = BoundEnvelope((-6.5, -0.5), (-6.0, 0.0), (0.5, 4.0), 0.25, 10, 10, 10, 10, 34.6, 34.6)
    if region_check_worst_case(e1, e2, PAPER_GAINS, env) is Region.CONVERGING:
        for b in (0.5, 1.0, 2.5, 4.0):
            assert region_check(e1, e2, derive_region(PAPER_GAINS, env, b)) is Region.CONVERGING


def test_region_needs_damping():
    with pytest.raises(ValueError):
        derive_region(CompensatorParams(20, 0, 0, 0), paper_envelope())


def test_region_map_shape():
    rows = region_map(derive_region(PAPER_GAINS, paper_envelope()), n=11)
    assert len(rows) == 121
    assert {r[2] for r in rows} <= {"Converging", "Inactive", "Boundary"}


def test_lyapunov_examples():
    assert lyapunov_value(0, 0) == 0
    assert lyapunov_value(3, 4) == 12.5
    assert lyapunov_value(-3, -4) == 12.5


@given(val, val)
def test_lyapunov_positive_definite(e1, e2):
    v = lyapunov_value(e1, e2)
    assert v >= 0
    if max(abs(e1), abs(e2)) > 1e-100:
        assert v > 0


def _pair(ref, unk, dt=1e-3):
    n = len(ref)
    z = np.zeros(n)
    return Trajectory(dt, np.arange(n) * dt, np.asarray(unk, float), z, z, z, z, reference=np.asarray(ref, float))


def test_descent_zero_error_is_clean():
    x = np.column_stack([np.linspace(0, 1, 50), np.ones(50)])
    rep = verify_descent(_pair(x, x), derive_region(PAPER_GAINS, paper_envelope()))
    assert rep.clean
    assert rep.converging_samples == 0
    assert rep.first_point["region"] == "Boundary"


def test_descent_flags_growth_inside_region():
    r = derive_region(PAPER_GAINS, paper_envelope())
    ref = np.zeros((3, 2))
    unk = -np.array([[20.0, 5.0], [30.0, 10.0], [40.0, 10.0]])
    rep = verify_descent(_pair(ref, unk), r)
    assert not rep.clean
    assert rep.violations[0]["index"] == 0


def test_descent_on_compensated_run():
    from complab.controllers import CompensatedController, ReferenceModel, SmcController, SmcGains
    from complab.dynamics import simulate

    g = SmcGains(boundary_layer=0.1)
    ctl = CompensatedController(SmcController(g), PAPER_GAINS, ReferenceModel(SmcController(g)), "reference")
    traj = simulate(custom_companion(-2.0, -1.0, 1.5), ctl, Step(10.0), horizon=2.0)
    rep = verify_descent(traj, derive_region(PAPER_GAINS, paper_envelope()))
    # Small errors never enter the (conservative) region, so the check is vacuous but clean.
    assert rep.clean
    assert rep.samples == len(traj)


@pytest.mark.parametrize("seed", [0, 3, 7])
def test_fig3e_violations_lie_outside_local_b_region(seed):
    import math

    from complab.harness import ScenarioRunner, load_scenario
    from complab.stability import error_signals

    cfg = load_scenario("fig3e").with_seed(seed)
    traj = ScenarioRunner(cfg).run(PAPER_GAINS)
    env = paper_envelope()
    rep = verify_descent(traj, derive_region(PAPER_GAINS, env), start=20)
    assert rep.first_point["region"] == "Converging"
    e1, e2 = error_signals(traj)
    # The b = 1 region is not a certificate for U1, whose b(x1) = 2 + 2 sin(x1) nearly
    # vanishes around x1 = 11. Every V increase must sit outside the region at the local b.
    for v in rep.violations:
        k = v["index"]
        b = 2.0 + 2.0 * math.sin(traj.states[k, 0])
        assert region_check(e1[k], e2[k], derive_region(PAPER_GAINS, env, b)) is not Region.CONVERGING
