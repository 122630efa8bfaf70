"""Control laws: SMC base controller, additive compensator, baselines and
traditional adaptive controllers.

The pure functions implement single evaluations of each law. The classes wrap
them as :class:`complab.dynamics.Controller` objects whose integrator and
adaptation states are integrated alongside the plant.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from complab.dynamics import Controller, SystemSpec, Target, reference_system

# ---------------------------------------------------------------------------
# Parameter types


@dataclass(frozen=True)
class SmcGains:
    """Sliding-mode gains. ``boundary_layer`` switches sign(s) to tanh(s / eps)."""

    lam: float = 3.0
    k: float = 60.0
    gamma: float = 0.1
    boundary_layer: float | None = None
    accel_feedforward: bool = False

    def __post_init__(self):
        if not (self.lam > 0 and self.k > 0 and self.gamma > 0):
            raise ValueError(f"SMC gains must be strictly positive: {self}")
        if self.boundary_layer is not None and not self.boundary_layer > 0:
            raise ValueError("boundary_layer must be positive when given")


class _Vector:
    """Mixin giving a gain dataclass element-wise +, -, scalar * and dict I/O."""

    def __add__(self, other):
        return type(self)(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def __sub__(self, other):
        return type(self)(*(a - b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def __mul__(self, c: float):
        return type(self)(*(c * a for a in self.as_tuple()))

    __rmul__ = __mul__

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict):
        names = [f.name for f in fields(cls)]
        extra = set(d) - set(names)
        if extra:
            raise KeyError(f"unknown {cls.__name__} fields: {sorted(extra)}")
        return cls(**{k: float(d.get(k, 0.0)) for k in names})

    @classmethod
    def zero(cls):
        return cls(*(0.0 for _ in fields(cls)))

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_tuple())


@dataclass(frozen=True)
class CompensatorParams(_Vector):
    kp: float = 0.0
    kd: float = 0.0
    kv: float = 0.0
    ki: float = 0.0


PAPER_GAINS = CompensatorParams(kp=20.0, kd=10.0, kv=8.5, ki=1.0)


@dataclass(frozen=True)
class PidGains(_Vector):
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0


@dataclass(frozen=True)
class AdaptivePidParams(_Vector):
    """PID gains plus MIT-rule adaptation rates, the direct-design template."""

    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    gamma_p: float = 0.0
    gamma_i: float = 0.0
    gamma_d: float = 0.0


@dataclass(frozen=True)
class ErrorState:
    e1: float
    e2: float
    I: float = 0.0

    def __mul__(self, c: float) -> "ErrorState":
        return ErrorState(c * self.e1, c * self.e2, c * self.I)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# Pure control laws


def sign(s: float) -> float:
    if s > 0:
        return 1.0
    if s < 0:
        return -1.0
    return 0.0


def switching(s: float, boundary_layer: float | None = None) -> float:
    if boundary_layer is None:
        return sign(s)
    return math.tanh(s / boundary_layer)


def sliding_surface(e: float, e_dot: float, lam: float) -> float:
    return e_dot + lam * e


def smc_control(
    state: Sequence[float],
    desired_position: float,
    gains: SmcGains,
    f_val: float,
    g_val: float,
    s_integral: float,
    desired_velocity: float = 0.0,
    desired_accel: float = 0.0,
) -> float:
    """u = (1/g)(-f - lam*e_dot - k*sign(s) - gamma*int(s)), e = x1 - x1d."""
    if g_val == 0:
        raise ZeroDivisionError("SMC input gain g is zero")
    x1, x2 = state
    e = x1 - desired_position
    e_dot = x2 - desired_velocity
    s = sliding_surface(e, e_dot, gains.lam)
    u = -f_val - gains.lam * e_dot - gains.k * switching(s, gains.boundary_layer) - gains.gamma * s_integral
    if gains.accel_feedforward:
        u += desired_accel
    return u / g_val


def compensator_control(err: ErrorState, params: CompensatorParams) -> float:
    return params.kp * err.e1 + (params.kd + params.kv) * err.e2 + params.ki * err.I


def compose_total(u_base: float, u_comp: float) -> float:
    return u_base + u_comp


def pid_control(e: float, e_dot: float, e_int: float, gains: PidGains) -> float:
    return gains.kp * e + gains.ki * e_int + gains.kd * e_dot


def setpoint_shaping(
    desired: float,
    err: ErrorState,
    params: CompensatorParams,
    bounds: tuple[float, float] = (-math.inf, math.inf),
) -> tuple[float, bool]:
    """Return the shaped target and whether it was clamped."""
    shaped = desired + compensator_control(err, params)
    lo, hi = bounds
    clamped = min(max(shaped, lo), hi)
    return clamped, clamped != shaped


# MRAC -----------------------------------------------------------------------


@dataclass(frozen=True)
class MracConfig:
    """Linear reference model x_m'' = a21 x_m + a22 x_m' + bm r and adaptation rates."""

    a21: float = -5.0
    a22: float = -3.0
    bm: float = 5.0
    gamma: tuple[float, float, float] = (2.0, 2.0, 2.0)
    theta0: tuple[float, float, float] = (0.0, 0.0, 5.0)
    bound_scale: float = 10.0
    bound_floor: float = 10.0

    @property
    def am(self) -> np.ndarray:
        return np.array([[0.0, 1.0], [self.a21, self.a22]])

    def lyapunov_p(self) -> np.ndarray:
        # Am^T P + P Am = -I
        return solve_continuous_lyapunov(self.am.T, -np.eye(2))

    def theta_bounds(self) -> np.ndarray:
        return np.maximum(self.bound_scale * np.abs(self.theta0), self.bound_floor)


def mrac_control(state: Sequence[float], r: float, theta: Sequence[float]) -> float:
    return theta[0] * state[0] + theta[1] * state[1] + theta[2] * r


def mrac_theta_rate(theta, e, state, r, gamma, P) -> np.ndarray:
    """theta' = -Gamma (e^T P B) phi with B = [0, 1] and phi = (x1, x2, r)."""
    e = np.asarray(e, dtype=float)
    ePb = float(e @ P[:, 1])
    phi = np.array([state[0], state[1], r], dtype=float)
    return -np.asarray(gamma, dtype=float) * ePb * phi


def mrac_update(theta, e, state, r, gamma, dt, P=None, bounds=None) -> np.ndarray:
    """Euler step of the MRAC adaptive law followed by box projection."""
    if P is None:
        P = MracConfig().lyapunov_p()
    theta = np.asarray(theta, dtype=float) + dt * mrac_theta_rate(theta, e, state, r, gamma, P)
    if bounds is not None:
        theta = np.clip(theta, -bounds, bounds)
    return theta


# Direct (certainty-equivalence) adaptive controller ---------------------------


@dataclass(frozen=True)
class DirectAdaptiveConfig:
    """Nominal model x'' = f_ref(x) + u - m*phi(x) with one unknown load m."""

    lam: float = 3.0
    ks: float = 10.0
    gamma_m: float = 5.0
    m0: float = 0.0
    m_min: float = -50.0
    m_max: float = 50.0


def load_regressor(x1: float, x2: float) -> float:
    # Constant (gravity-like) load.
    return 1.0


def direct_adaptive_control(
    state: Sequence[float],
    desired: float,
    m_hat: float,
    cfg: DirectAdaptiveConfig = DirectAdaptiveConfig(),
    model: SystemSpec | None = None,
    desired_velocity: float = 0.0,
    desired_accel: float = 0.0,
) -> tuple[float, float]:
    """Return ``(u, s)``; u cancels the nominal dynamics and the estimated load."""
    model = model or reference_system()
    x1, x2 = state
    a21, a22, b = model.coefficients(x1, x2)
    f = a21 * x1 + a22 * x2
    e = x1 - desired
    e_dot = x2 - desired_velocity
    s = sliding_surface(e, e_dot, cfg.lam)
    u = (-f + desired_accel - cfg.lam * e_dot - cfg.ks * s + m_hat * load_regressor(x1, x2)) / b
    return u, s


def payload_update(m_hat: float, s: float, phi: float, gamma_m: float, dt: float, bounds=(-math.inf, math.inf)) -> float:
    m_new = m_hat - gamma_m * s * phi * dt
    return min(max(m_new, bounds[0]), bounds[1])


# ---------------------------------------------------------------------------
# Controller objects for closed-loop simulation


def _ref_terms(model: SystemSpec, x1: float, x2: float, t: float) -> tuple[float, float]:
    a21, a22, b = model.coefficients(x1, x2, t)
    return a21 * x1 + a22 * x2, b


class SmcController(Controller):
    """Eq.-2 style SMC; f and g always come from ``model`` (the reference plant)."""

    n_states = 1

    def __init__(self, gains: SmcGains, model: SystemSpec | None = None):
        self.gains = gains
        self.model = model or reference_system()

    def reset(self, x0, target):
        return [0.0]

    def law(self, t, x1, x2, s_int, xd, xd_dot, xd_ddot):
        g = self.gains
        f_val, g_val = _ref_terms(self.model, x1, x2, t)
        e = x1 - xd
        e_dot = x2 - xd_dot
        s = e_dot + g.lam * e
        sw = math.tanh(s / g.boundary_layer) if g.boundary_layer else sign(s)
        u = -f_val - g.lam * e_dot - g.k * sw - g.gamma * s_int
        if g.accel_feedforward:
            u += xd_ddot
        return u / g_val, s

    def evaluate(self, t, x1, x2, z, target):
        u, s = self.law(t, x1, x2, z[0], target.value(t), target.rate(t), target.accel(t))
        return u, 0.0, [s]


class PdController(Controller):
    """Opaque PD joint controller: u = Kp (target - x1) - Kd x2."""

    def __init__(self, kp: float, kd: float):
        self.kp, self.kd = kp, kd

    def law(self, x1, x2, xd):
        return self.kp * (xd - x1) - self.kd * x2

    def evaluate(self, t, x1, x2, z, target):
        return self.law(x1, x2, target.value(t)), 0.0, []


class PidController(Controller):
    n_states = 1

    def __init__(self, gains: PidGains):
        self.gains = gains

    def reset(self, x0, target):
        return [0.0]

    def evaluate(self, t, x1, x2, z, target):
        e = target.value(t) - x1
        e_dot = target.rate(t) - x2
        return pid_control(e, e_dot, z[0], self.gains), 0.0, [e]


class MracController(Controller):
    """States: reference model (xm1, xm2) and theta (3)."""

    n_states = 5

    def __init__(self, cfg: MracConfig = MracConfig()):
        self.cfg = cfg
        self.P = cfg.lyapunov_p()
        self.bounds = cfg.theta_bounds()
        self.projections = 0

    def reset(self, x0, target):
        return [float(x0[0]), float(x0[1]), *self.cfg.theta0]

    def evaluate(self, t, x1, x2, z, target):
        c = self.cfg
        r = target.value(t)
        xm1, xm2 = z[0], z[1]
        theta = z[2:5]
        u = mrac_control((x1, x2), r, theta)
        rate = mrac_theta_rate(theta, (x1 - xm1, x2 - xm2), (x1, x2), r, c.gamma, self.P)
        return u, 0.0, [xm2, c.a21 * xm1 + c.a22 * xm2 + c.bm * r, *rate.tolist()]

    def post_step(self, z):
        b = self.bounds
        for i in range(3):
            v = z[2 + i]
            if v > b[i] or v < -b[i]:
                z[2 + i] = min(max(v, -b[i]), b[i])
                self.projections += 1
        return z


class DirectAdaptiveController(Controller):
    """States: load estimate m_hat."""

    n_states = 1

    def __init__(self, cfg: DirectAdaptiveConfig = DirectAdaptiveConfig(), model: SystemSpec | None = None):
        self.cfg = cfg
        self.model = model or reference_system()

    def reset(self, x0, target):
        return [self.cfg.m0]

    def evaluate(self, t, x1, x2, z, target):
        u, s = direct_adaptive_control(
            (x1, x2), target.value(t), z[0], self.cfg, self.model, target.rate(t), target.accel(t)
        )
        return u, 0.0, [-self.cfg.gamma_m * s * load_regressor(x1, x2)]

    def post_step(self, z):
        z[0] = min(max(z[0], self.cfg.m_min), self.cfg.m_max)
        return z


class AdaptivePidController(Controller):
    """PID whose gains follow the MIT rule theta' = gamma * e * phi, phi = (e, int e, e')."""

    n_states = 4

    def __init__(self, params: AdaptivePidParams, gain_max: float = 1e3):
        self.params = params
        self.gain_max = gain_max

    def reset(self, x0, target):
        p = self.params
        return [0.0, p.kp, p.ki, p.kd]

    def evaluate(self, t, x1, x2, z, target):
        p = self.params
        e = target.value(t) - x1
        e_dot = target.rate(t) - x2
        e_int, kp, ki, kd = z
        u = kp * e + ki * e_int + kd * e_dot
        return u, 0.0, [e, p.gamma_p * e * e, p.gamma_i * e * e_int, p.gamma_d * e * e_dot]

    def post_step(self, z):
        for i in (1, 2, 3):
            z[i] = min(max(z[i], 0.0), self.gain_max)
        return z


class ReferenceModel:
    """Reference plant closed around its own controller, integrated in lockstep."""

    def __init__(self, controller: Controller, plant: SystemSpec | None = None, x0=(0.0, 0.0)):
        self.controller = controller
        self.plant = plant or reference_system()
        self.x0 = (float(x0[0]), float(x0[1]))

    @property
    def n_states(self) -> int:
        return 2 + self.controller.n_states

    def reset(self, target):
        return [*self.x0, *self.controller.reset(self.x0, target)]

    def derivative(self, t, z, target):
        x1, x2 = z[0], z[1]
        ub, uc, zdot = self.controller.evaluate(t, x1, x2, z[2:], target)
        a21, a22, b = self.plant.coefficients(x1, x2, t)
        return [x2, a21 * x1 + a22 * x2 + b * (ub + uc), *zdot]


class CompensatedController(Controller):
    """Fixed base controller plus the additive compensator.

    State layout: [reference model..., base controller..., I]. With
    ``params=None`` the compensator is off but the reference model is still
    carried so that the logged trajectory holds both responses.
    ``integral_mode`` selects what I integrates: ``"desired"`` uses
    (x1d - x1u), ``"reference"`` uses (x1r - x1u).
    """

    def __init__(
        self,
        base: Controller,
        params: CompensatorParams | None,
        reference: ReferenceModel,
        integral_mode: str = "desired",
    ):
        if integral_mode not in ("desired", "reference"):
            raise ValueError(f"unknown integral_mode {integral_mode!r}")
        self.base = base
        self.params = params
        self.reference = reference
        self.integral_mode = integral_mode
        self._nr = reference.n_states
        self._nb = base.n_states
        self.n_states = self._nr + self._nb + 1

    def reset(self, x0, target):
        return [*self.reference.reset(target), *self.base.reset(x0, target), 0.0]

    def evaluate(self, t, x1, x2, z, target):
        nr, nb = self._nr, self._nb
        zr = z[:nr]
        dr = self.reference.derivative(t, zr, target)
        ub, _, db = self.base.evaluate(t, x1, x2, z[nr : nr + nb], target)
        I = z[nr + nb]
        x1r, x2r = zr[0], zr[1]
        p = self.params
        uc = 0.0 if p is None else p.kp * (x1r - x1) + (p.kd + p.kv) * (x2r - x2) + p.ki * I
        dI = (target.value(t) - x1) if self.integral_mode == "desired" else (x1r - x1)
        return ub, uc, [*dr, *db, dI]

    def post_step(self, z):
        nr, nb = self._nr, self._nb
        z[nr : nr + nb] = self.base.post_step(z[nr : nr + nb])
        return z

    def reference_state(self, z):
        return (z[0], z[1])


class _Shifted(Target):
    """Target whose value is replaced by the shaped set-point."""

    def __init__(self, base: Target, value: float):
        self.base, self._value = base, value

    def value(self, t):
        return self._value

    def rate(self, t):
        return self.base.rate(t)

    def accel(self, t):
        return self.base.accel(t)


class SetpointShapingController(Controller):
    """Indirect compensation: the compensator moves the target fed to an opaque inner controller.

    The inner controller's gains are never touched; its output is logged as
    ``u_base`` and ``u_comp`` stays zero.
    """

    def __init__(
        self,
        inner: Controller,
        params: CompensatorParams | None,
        reference: ReferenceModel,
        bounds: tuple[float, float] = (-math.inf, math.inf),
    ):
        self.inner = inner
        self.params = params
        self.reference = reference
        self.bounds = bounds
        self._nr = reference.n_states
        self._ni = inner.n_states
        self.n_states = self._nr + self._ni + 1
        self.clamp_events = 0

    def reset(self, x0, target):
        return [*self.reference.reset(target), *self.inner.reset(x0, target), 0.0]

    def _shaped(self, t, x1, x2, z, target):
        xd = target.value(t)
        if self.params is None:
            return xd, False
        err = ErrorState(z[0] - x1, z[1] - x2, z[self._nr + self._ni])
        return setpoint_shaping(xd, err, self.params, self.bounds)

    def evaluate(self, t, x1, x2, z, target):
        nr, ni = self._nr, self._ni
        dr = self.reference.derivative(t, z[:nr], target)
        shaped, _ = self._shaped(t, x1, x2, z, target)
        ub, _, di = self.inner.evaluate(t, x1, x2, z[nr : nr + ni], _Shifted(target, shaped))
        return ub, 0.0, [*dr, *di, target.value(t) - x1]

    def post_step(self, z):
        return z

    def commanded_target(self, t, x1, x2, z, target):
        shaped, clamped = self._shaped(t, x1, x2, z, target)
        if clamped:
            self.clamp_events += 1
        return shaped

    def reference_state(self, z):
        return (z[0], z[1])
