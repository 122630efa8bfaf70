"""Named plants and controllers that scenario configs refer to by id."""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Callable

from complab.controllers import (
    AdaptivePidController,
    AdaptivePidParams,
    DirectAdaptiveConfig,
    DirectAdaptiveController,
    MracConfig,
    MracController,
    PdController,
    PidController,
    PidGains,
    SmcController,
    SmcGains,
)
from complab.dynamics import (
    Controller,
    SystemSpec,
    custom_companion,
    mismatch_u3,
    reference_system,
    unknown_system_1,
    unknown_system_2,
)


# Companion A: time-varying coefficients, every range inside the U1 envelope.
#   a21 = -3 - 2 sin(0.5 t)       in [-5, -1]
#   a22 = -2.5 + 1.5 cos(t)       in [-4, -1]
#   b   = 1.5 + 0.5 sin(0.3 t)    in [1, 2]
#   d   = 0.1 cos(x1) + 0.1 xi
def companion_a(seed: int = 0) -> SystemSpec:
    return custom_companion(
        lambda x1, x2, t: -3.0 - 2.0 * math.sin(0.5 * t),
        lambda x1, x2, t: -2.5 + 1.5 * math.cos(t),
        lambda x1, x2, t: 1.5 + 0.5 * math.sin(0.3 * t),
        lambda x1, x2, t: 0.1 * math.cos(x1),
        noise_gain=0.1,
        seed=seed,
        name="companion_a",
    )


# Companion B: weak input gain and heavy damping, state dependent.
#   a21 = -1.5 - cos(0.3 x1)          in [-2.5, -0.5]
#   a22 = -5 + 2 tanh(0.1 x2)         in (-7, -3)
#   b   = 0.6 + 0.3 cos(0.5 x1)       in [0.3, 0.9]
#   d   = 0.15 sin(0.1 x2) + 0.1 xi
def companion_b(seed: int = 0) -> SystemSpec:
    return custom_companion(
        lambda x1, x2, t: -1.5 - math.cos(0.3 * x1),
        lambda x1, x2, t: -5.0 + 2.0 * math.tanh(0.1 * x2),
        lambda x1, x2, t: 0.6 + 0.3 * math.cos(0.5 * x1),
        lambda x1, x2, t: 0.15 * math.sin(0.1 * x2),
        noise_gain=0.1,
        seed=seed,
        name="companion_b",
    )


# Single shoulder joint, angle in degrees. The "hardware" joint is the
# reference; the simulated joint is lighter and less damped.
def joint_hardware(seed: int = 0) -> SystemSpec:
    return custom_companion(0.0, -6.0, 1.0, lambda x1, x2, t: -15.0 * math.sin(math.radians(x1)), name="joint_hardware")


def joint_sim(seed: int = 0) -> SystemSpec:
    return custom_companion(0.0, -3.0, 1.25, lambda x1, x2, t: -10.0 * math.sin(math.radians(x1)), name="joint_sim")


SYSTEMS: dict[str, Callable[[int], SystemSpec]] = {
    "reference": lambda seed=0: reference_system(),
    "unknown1": unknown_system_1,
    "unknown2": unknown_system_2,
    "mismatch_u3": lambda seed=0: mismatch_u3(),
    "companion_a": companion_a,
    "companion_b": companion_b,
    "joint_hardware": joint_hardware,
    "joint_sim": joint_sim,
}


def make_system(name: str, seed: int = 0, b_scale: float = 1.0, load: float = 0.0) -> SystemSpec:
    """Plant by id; ``b_scale`` and ``load`` emulate a payload change."""
    try:
        spec = SYSTEMS[name](seed)
    except KeyError:
        raise KeyError(f"unknown system {name!r}; known: {sorted(SYSTEMS)}") from None
    if b_scale != 1.0:
        b_fn = spec.b_fn
        spec = replace(spec, b_fn=lambda x1, x2, t: b_scale * b_fn(x1, x2, t))
    if load != 0.0:
        bias = spec.disturbance.bias_fn
        spec = replace(spec, disturbance=replace(spec.disturbance, bias_fn=lambda x1, x2, t: bias(x1, x2, t) - load))
    return spec


def _smc(g: dict) -> Controller:
    return SmcController(SmcGains(**g))


def _pd(g: dict) -> Controller:
    if set(g) != {"kp", "kd"}:
        raise TypeError(f"pd needs exactly kp and kd, got {sorted(g)}")
    return PdController(float(g["kp"]), float(g["kd"]))


def _mrac(g: dict) -> Controller:
    g = {k: tuple(v) if isinstance(v, list) else v for k, v in g.items()}
    return MracController(MracConfig(**g))


CONTROLLERS: dict[str, Callable[[dict], Controller]] = {
    "smc": _smc,
    "pd": _pd,
    "pid": lambda g: PidController(PidGains.from_dict(g)),
    "mrac": _mrac,
    "direct_adaptive": lambda g: DirectAdaptiveController(DirectAdaptiveConfig(**g)),
    "adaptive_pid": lambda g: AdaptivePidController(AdaptivePidParams.from_dict(g)),
}


def make_controller(kind: str, gains: dict) -> Controller:
    try:
        factory = CONTROLLERS[kind]
    except KeyError:
        raise KeyError(f"unknown controller {kind!r}; known: {sorted(CONTROLLERS)}") from None
    try:
        return factory(dict(gains))
    except (TypeError, KeyError) as exc:
        raise ValueError(f"bad gains for {kind}: {exc}") from None


# Coefficient envelope of Unknown System 1 (b floored away from zero so the
# plant stays controllable).
RANDOM_ENVELOPE = {"a21": (-6.5, -0.5), "a22": (-6.0, 0.0), "b": (0.25, 4.0)}


def random_companion(rng, name: str = "random", bias_max: float = 0.2, noise_gain: float = 0.05) -> tuple[SystemSpec, dict]:
    """Companion plant whose coefficients are c + A sin(w * v), v one of x1, x2, t, inside RANDOM_ENVELOPE.

    Returns the spec and a plain description of the draw.
    """
    desc = {}
    coefs = []
    for key in ("a21", "a22", "b"):
        lo, hi = RANDOM_ENVELOPE[key]
        amp = float(rng.uniform(0.0, (hi - lo) / 2))
        c = float(rng.uniform(lo + amp, hi - amp))
        w = float(rng.uniform(0.1, 1.0))
        k = int(rng.integers(3))
        coefs.append(lambda x1, x2, t, c=c, amp=amp, w=w, k=k: c + amp * math.sin(w * (x1, x2, t)[k]))
        desc[key] = {"c": c, "amp": amp, "w": w, "var": ("x1", "x2", "t")[k]}
    bias = float(rng.uniform(0.0, bias_max))
    desc["bias"] = bias
    seed = int(rng.integers(2**31))
    spec = custom_companion(*coefs, lambda x1, x2, t: -bias * math.sin(x1), noise_gain, seed=seed, name=name)
    return spec, desc
