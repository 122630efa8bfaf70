"""Plant families and fixed-step RK4 integration.

Every system here is written in the form

    x1' = x2 + g1 * u
    x2' = a21(x, t) * x1 + a22(x, t) * x2 + b(x, t) * u + d(x, t)

with ``g1 == 0`` for companion-form plants. Positions are in mm, time in s.
"""
from __future__ import annotations

import enum
import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

DEFAULT_DT = 1e-3
DEFAULT_HORIZON = 5.0
NOISE_DT = 1e-3

Coef = Callable[[float, float, float], float]


class SimulationFault(RuntimeError):
    """Raised when a state, input or derivative stops being finite."""


class StateVec(NamedTuple):
    x1: float
    x2: float


class SystemKind(str, enum.Enum):
    REFERENCE = "Reference"
    UNKNOWN1 = "Unknown1"
    UNKNOWN2 = "Unknown2"
    MISMATCH_U3 = "MismatchU3"
    CUSTOM = "CustomCompanion"


class NoiseKind(str, enum.Enum):
    NONE = "None"
    UNIFORM = "UniformSymmetric"


def _zero(x1: float, x2: float, t: float) -> float:
    return 0.0


def constant(value: float) -> Coef:
    value = float(value)

    def coef(x1: float, x2: float, t: float) -> float:
        return value

    coef.__name__ = f"constant({value:g})"
    return coef


@dataclass(frozen=True)
class DisturbanceSpec:
    bias_fn: Coef = _zero
    noise_gain: float = 0.0
    noise_kind: NoiseKind = NoiseKind.NONE
    seed: int = 0

    @property
    def has_noise(self) -> bool:
        return self.noise_kind is not NoiseKind.NONE and self.noise_gain != 0.0


@dataclass(frozen=True)
class SystemSpec:
    kind: SystemKind
    a21_fn: Coef
    a22_fn: Coef
    b_fn: Coef
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    name: str = ""
    # Input coupling into the position equation; nonzero only for MismatchU3.
    input_gain_1: float = 0.0

    @property
    def is_companion(self) -> bool:
        return self.input_gain_1 == 0.0

    def coefficients(self, x1: float, x2: float, t: float = 0.0) -> tuple[float, float, float]:
        return self.a21_fn(x1, x2, t), self.a22_fn(x1, x2, t), self.b_fn(x1, x2, t)

    def with_seed(self, seed: int) -> "SystemSpec":
        return replace(self, disturbance=replace(self.disturbance, seed=int(seed)))


# Unknown System 1 coefficients, as printed in the matrix form (sin(0.5 x1) in a21).
def _u1_a21(x1, x2, t):
    return -3.5 + 3.0 * math.sin(0.5 * x1)


def _u1_a22(x1, x2, t):
    return -3.0 + 3.0 * math.cos(0.2 * x2)


def _u1_b(x1, x2, t):
    return 2.0 + 2.0 * math.sin(x1)


def _u2_a21(x1, x2, t):
    return -4.0 + 2.0 * math.sin(x1)


def _u2_a22(x1, x2, t):
    return -10.0 + 3.0 * math.tanh(0.2 * x2)


def _u2_b(x1, x2, t):
    return 0.8 + 0.2 * math.cos(x1)


def _sin_bias(x1, x2, t):
    return -0.2 * math.sin(x1)


def reference_system() -> SystemSpec:
    return SystemSpec(SystemKind.REFERENCE, constant(-5.0), constant(-3.0), constant(1.0), name="reference")


def unknown_system_1(seed: int = 0) -> SystemSpec:
    dist = DisturbanceSpec(_sin_bias, 0.05, NoiseKind.UNIFORM, seed)
    return SystemSpec(SystemKind.UNKNOWN1, _u1_a21, _u1_a22, _u1_b, dist, name="unknown1")


def unknown_system_2(seed: int = 0) -> SystemSpec:
    dist = DisturbanceSpec(_sin_bias, 0.5, NoiseKind.UNIFORM, seed)
    return SystemSpec(SystemKind.UNKNOWN2, _u2_a21, _u2_a22, _u2_b, dist, name="unknown2")


def mismatch_u3() -> SystemSpec:
    """Input enters the position equation: x1' = x2 + 0.7u, x2' = -4x1 - 3x2 + 0.5u."""
    return SystemSpec(
        SystemKind.MISMATCH_U3, constant(-4.0), constant(-3.0), constant(0.5), name="mismatch_u3", input_gain_1=0.7
    )


def custom_companion(
    a21: float | Coef,
    a22: float | Coef,
    b: float | Coef,
    bias: float | Coef = 0.0,
    noise_gain: float = 0.0,
    seed: int = 0,
    name: str = "custom",
) -> SystemSpec:
    def as_coef(v):
        return v if callable(v) else constant(v)

    kind = NoiseKind.UNIFORM if noise_gain else NoiseKind.NONE
    dist = DisturbanceSpec(as_coef(bias), float(noise_gain), kind, seed)
    return SystemSpec(SystemKind.CUSTOM, as_coef(a21), as_coef(a22), as_coef(b), dist, name=name)


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise SimulationFault(f"non-finite value encountered: {values}")


def eval_dynamics(spec: SystemSpec, state: Sequence[float], u: float, xi: float = 0.0, t: float = 0.0) -> StateVec:
    x1, x2 = state
    _check_finite(x1, x2, u, xi)
    a21, a22, b = spec.coefficients(x1, x2, t)
    dist = spec.disturbance
    d = dist.bias_fn(x1, x2, t) + dist.noise_gain * xi
    dx1 = x2 + spec.input_gain_1 * u if spec.input_gain_1 else x2
    dx2 = a21 * x1 + a22 * x2 + b * u + d
    return StateVec(dx1, dx2)


def rk4_step(spec: SystemSpec, state: Sequence[float], u: float, xi: float, dt: float, t: float = 0.0) -> StateVec:
    """One classical RK4 step of the plant alone with ``u`` and ``xi`` held over the step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x1, x2 = state
    h = 0.5 * dt
    k1 = eval_dynamics(spec, (x1, x2), u, xi, t)
    k2 = eval_dynamics(spec, (x1 + h * k1[0], x2 + h * k1[1]), u, xi, t + h)
    k3 = eval_dynamics(spec, (x1 + h * k2[0], x2 + h * k2[1]), u, xi, t + h)
    k4 = eval_dynamics(spec, (x1 + dt * k3[0], x2 + dt * k3[1]), u, xi, t + dt)
    out = StateVec(
        x1 + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        x2 + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
    )
    _check_finite(*out)
    return out


def derive_seed(seed: int, stream: str) -> int:
    """Independent, reproducible RNG seed for one (seed, scenario) pair."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stream.encode())])
    return int(ss.generate_state(1)[0])


class NoiseSource:
    """Piecewise-constant xi(t) on a fixed time grid.

    The grid does not depend on the integration step, so runs at dt and dt/2
    see the same noise realisation.
    """

    def __init__(self, seed: int, horizon: float, grid_dt: float = NOISE_DT, active: bool = True):
        self.grid_dt = grid_dt
        n = int(math.ceil(horizon / grid_dt)) + 2
        if active:
            self.values = np.random.default_rng(seed).uniform(-1.0, 1.0, n).tolist()
        else:
            self.values = [0.0] * n

    def __call__(self, t: float) -> float:
        return self.values[int(t / self.grid_dt + 1e-9)]


# ---------------------------------------------------------------------------
# Targets


class Target:
    kind = "target"

    def value(self, t: float) -> float:
        raise NotImplementedError

    def rate(self, t: float) -> float:
        return 0.0

    def accel(self, t: float) -> float:
        return 0.0

    def __call__(self, t: float) -> float:
        return self.value(t)


@dataclass(frozen=True)
class Step(Target):
    amplitude: float
    time: float = 0.0
    initial: float = 0.0
    kind = "step"

    def value(self, t):
        return self.amplitude if t >= self.time else self.initial


@dataclass(frozen=True)
class Sinusoid(Target):
    amplitude: float
    frequency: float
    offset: float = 0.0
    kind = "sinusoid"

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    def value(self, t):
        return self.offset + self.amplitude * math.sin(self.omega * t)

    def rate(self, t):
        return self.amplitude * self.omega * math.cos(self.omega * t)

    def accel(self, t):
        return -self.amplitude * self.omega**2 * math.sin(self.omega * t)


# ---------------------------------------------------------------------------
# Closed-loop simulation


class Controller:
    """Continuous-time control law with its own integrator states.

    ``evaluate`` is called at every RK4 stage and returns
    ``(u_base, u_comp, dz/dt)``.
    """

    n_states = 0

    def reset(self, x0: Sequence[float], target: Target) -> list[float]:
        return []

    def evaluate(self, t: float, x1: float, x2: float, z: Sequence[float], target: Target):
        raise NotImplementedError

    def post_step(self, z: list[float]) -> list[float]:
        return z

    def reference_state(self, z: Sequence[float]) -> tuple[float, float] | None:
        return None

    def commanded_target(self, t: float, x1: float, x2: float, z: Sequence[float], target: Target) -> float:
        return target.value(t)


class ZeroController(Controller):
    def evaluate(self, t, x1, x2, z, target):
        return 0.0, 0.0, []


@dataclass
class Trajectory:
    dt: float
    t: np.ndarray
    states: np.ndarray
    u_base: np.ndarray
    u_comp: np.ndarray
    u_total: np.ndarray
    target: np.ndarray
    reference: np.ndarray | None = None
    commanded: np.ndarray | None = None
    fault: str | None = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def y(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def horizon(self) -> float:
        return float(self.t[-1]) if len(self.t) else 0.0

    @property
    def ok(self) -> bool:
        return self.fault is None


@dataclass(frozen=True)
class DisturbanceEvent:
    time: float
    state: tuple[float, float]


def simulate(
    spec: SystemSpec,
    controller: Controller,
    target: Target,
    horizon: float = DEFAULT_HORIZON,
    dt: float = DEFAULT_DT,
    disturbance_events: Sequence[DisturbanceEvent] = (),
    x0: Sequence[float] = (0.0, 0.0),
    noise_dt: float = NOISE_DT,
) -> Trajectory:
    """Integrate plant and controller states together with RK4.

    The control law is re-evaluated at every stage; the noise sample is held
    for the whole step. Faults stop the run and are reported on the returned
    (partial) trajectory instead of being raised.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not dt > 0 or dt >= horizon:
        raise ValueError("need 0 < dt < horizon")
    n = int(round(horizon / dt))
    noise = NoiseSource(spec.disturbance.seed, horizon, noise_dt, spec.disturbance.has_noise)
    pending = sorted(disturbance_events, key=lambda ev: ev.time)
    event_steps = [(int(math.ceil(ev.time / dt - 1e-9)), ev.state) for ev in pending]

    a21_fn, a22_fn, b_fn = spec.a21_fn, spec.a22_fn, spec.b_fn
    bias_fn, noise_gain, g1 = spec.disturbance.bias_fn, spec.disturbance.noise_gain, spec.input_gain_1
    evaluate = controller.evaluate

    def field(t, y, xi):
        x1, x2 = y[0], y[1]
        ub, uc, zdot = evaluate(t, x1, x2, y[2:], target)
        u = ub + uc
        dx1 = x2 + g1 * u
        dx2 = a21_fn(x1, x2, t) * x1 + a22_fn(x1, x2, t) * x2 + b_fn(x1, x2, t) * u + bias_fn(x1, x2, t) + noise_gain * xi
        return [dx1, dx2, *zdot], ub, uc

    y = [float(x0[0]), float(x0[1]), *controller.reset(x0, target)]
    rows_x, rows_ub, rows_uc, rows_tg, rows_ref, rows_cmd = [], [], [], [], [], []
    has_ref = controller.reference_state(y[2:]) is not None
    fault = None
    h = 0.5 * dt
    ev_i = 0
    for k in range(n + 1):
        t = k * dt
        while ev_i < len(event_steps) and event_steps[ev_i][0] <= k:
            y[0], y[1] = (float(v) for v in event_steps[ev_i][1])
            ev_i += 1
        xi = noise(t)
        try:
            k1, ub, uc = field(t, y, xi)
            if not all(math.isfinite(v) for v in k1) or not math.isfinite(ub + uc):
                raise SimulationFault(f"non-finite derivative or control at t={t:.6g}")
        except (SimulationFault, OverflowError, ValueError, ZeroDivisionError) as exc:
            fault = f"{type(exc).__name__}: {exc}"
            break
        rows_x.append((y[0], y[1]))
        rows_ub.append(ub)
        rows_uc.append(uc)
        rows_tg.append(target.value(t))
        if has_ref:
            rows_ref.append(controller.reference_state(y[2:]))
        rows_cmd.append(controller.commanded_target(t, y[0], y[1], y[2:], target))
        if k == n:
            break
        try:
            k2 = field(t + h, [a + h * b for a, b in zip(y, k1)], xi)[0]
            k3 = field(t + h, [a + h * b for a, b in zip(y, k2)], xi)[0]
            k4 = field(t + dt, [a + dt * b for a, b in zip(y, k3)], xi)[0]
            y = [a + dt / 6.0 * (p + 2.0 * q + 2.0 * r + s) for a, p, q, r, s in zip(y, k1, k2, k3, k4)]
            y[2:] = controller.post_step(y[2:])
            if not all(math.isfinite(v) for v in y):
                raise SimulationFault(f"non-finite state after step at t={t + dt:.6g}")
        except (SimulationFault, OverflowError, ValueError, ZeroDivisionError) as exc:
            fault = f"{type(exc).__name__}: {exc}"
            break

    m = len(rows_x)
    ub_arr = np.asarray(rows_ub, dtype=float)
    uc_arr = np.asarray(rows_uc, dtype=float)
    return Trajectory(
        dt=dt,
        t=np.arange(m) * dt,
        states=np.asarray(rows_x, dtype=float).reshape(m, 2),
        u_base=ub_arr,
        u_comp=uc_arr,
        u_total=ub_arr + uc_arr,
        target=np.asarray(rows_tg, dtype=float),
        reference=np.asarray(rows_ref, dtype=float).reshape(m, 2) if has_ref else None,
        commanded=np.asarray(rows_cmd, dtype=float),
        fault=fault,
    )
