"""Lyapunov convergence-region analysis of the compensated error dynamics.

With V = (e1^2 + e2^2)/2 and the mismatch term Delta between the reference and
unknown dynamics,

    dV/dt = e1 e2 - b e2 u_comp + e2 Delta
          = e2 [(1 - b kp) e1 - b (kd + kv) e2 - b ki I + Delta].

Bounding |Delta| from an envelope of coefficients and signal magnitudes turns
dV/dt < 0 into two half-planes in (e1, e2) (with I neglected).
"""
from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from complab.controllers import CompensatorParams
from complab.dynamics import SystemSpec, Trajectory

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class BoundEnvelope:
    a21_range: tuple[float, float]
    a22_range: tuple[float, float]
    b_range: tuple[float, float]
    d_max: float
    x1u_max: float = 0.0
    x2u_max: float = 0.0
    x1r_max: float = 0.0
    x2r_max: float = 0.0
    ubase_max: float = 0.0
    ur_max: float = 0.0

    def __post_init__(self):
        for name in ("a21_range", "a22_range", "b_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is empty: {(lo, hi)}")
        caps = (self.d_max, self.x1u_max, self.x2u_max, self.x1r_max, self.x2r_max, self.ubase_max, self.ur_max)
        if any(c < 0 for c in caps):
            raise ValueError("magnitude caps must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "BoundEnvelope":
        d = dict(d)
        d.pop("comment", None)
        for name in ("a21_range", "a22_range", "b_range"):
            d[name] = tuple(d[name])
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


PAPER_ENVELOPE_FILE = Path(__file__).with_name("presets") / "paper_envelope.json"


def paper_envelope() -> BoundEnvelope:
    """Envelope whose worst-case mismatch bound equals 274.45 (caps back-solved)."""
    return BoundEnvelope.from_dict(json.loads(PAPER_ENVELOPE_FILE.read_text()))


def _absmax(rng: tuple[float, float]) -> float:
    return max(abs(rng[0]), abs(rng[1]))


def delta_fixed(
    states_u: Sequence[float],
    states_r: Sequence[float],
    u_base: float,
    u_r: float,
    d: float,
    spec: SystemSpec | None = None,
    coefficients: tuple[float, float, float] | None = None,
    t: float = 0.0,
) -> float:
    """a21 x1u + a22 x2u - 5 x1r - 3 x2r + b u_base - u_r + d.

    Coefficients are evaluated from ``spec`` at the unknown state unless given
    explicitly.
    """
    x1u, x2u = states_u
    x1r, x2r = states_r
    if coefficients is None:
        if spec is None:
            raise ValueError("need spec or coefficients")
        coefficients = spec.coefficients(x1u, x2u, t)
    a21, a22, b = coefficients
    return a21 * x1u + a22 * x2u - 5.0 * x1r - 3.0 * x2r + b * u_base - u_r + d


def delta_bound(env: BoundEnvelope) -> float:
    return (
        _absmax(env.a21_range) * env.x1u_max
        + _absmax(env.a22_range) * env.x2u_max
        + 5.0 * env.x1r_max
        + 3.0 * env.x2r_max
        + _absmax(env.b_range) * env.ubase_max
        + env.ur_max
        + env.d_max
    )


def vdot(e1, e2, I, delta, params: CompensatorParams, b):
    """dV/dt in the direct form e1 e2 - b e2 u_comp + e2 Delta.

    Pure arithmetic, so it also accepts sympy symbols or Fractions.
    """
    u_comp = params.kp * e1 + (params.kd + params.kv) * e2 + params.ki * I
    return e1 * e2 - b * e2 * u_comp + e2 * delta


def vdot_expanded(e1, e2, I, delta, params: CompensatorParams, b):
    """dV/dt collected inside the e2 factor."""
    return e2 * ((1 - b * params.kp) * e1 - b * (params.kd + params.kv) * e2 - b * params.ki * I + delta)


def vdot_worst_case(e1, e2, I, delta_max, params: CompensatorParams, b):
    """Upper bound of dV/dt over all |Delta| <= delta_max."""
    return vdot_expanded(e1, e2, I, 0.0, params, b) + abs(e2) * delta_max


@functools.cache
def _vdot_ring():
    import sympy as sp

    return sp.ring("e1,e2,I,Delta", sp.QQ)


def vdot_coefficients(params: CompensatorParams, b=1) -> tuple:
    """Exact coefficients of (e1, e2, I) inside the e2 factor of dV/dt.

    The gains are converted to rationals and dV/dt is expanded in a sparse
    polynomial ring over QQ; returns sympy Rationals.
    """
    import sympy as sp

    R, e1, e2, I, D = _vdot_ring()
    exact = CompensatorParams(*(R(sp.Rational(str(v))) for v in params.as_tuple()))
    poly = vdot(e1, e2, I, D, exact, R(sp.Rational(str(b))))
    return tuple(sp.Rational(poly.coeff(m)) for m in (e1 * e2, e2**2, e2 * I))


def lyapunov_value(e1: float, e2: float) -> float:
    return 0.5 * (e1 * e1 + e2 * e2)


class Region(str, enum.Enum):
    CONVERGING = "Converging"
    INACTIVE = "Inactive"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class RegionSpec:
    """c1 * e1 + e2 > threshold (e2 > 0) or < -threshold (e2 < 0)."""

    c1: float
    threshold: float
    b: float = 1.0
    delta_max: float = 0.0
    params: CompensatorParams = field(default_factory=CompensatorParams)

    def to_dict(self) -> dict:
        return {
            "c1": self.c1,
            "threshold": self.threshold,
            "b": self.b,
            "delta_max": self.delta_max,
            "params": self.params.to_dict(),
        }


def derive_region(params: CompensatorParams, env: BoundEnvelope, b: float = 1.0) -> RegionSpec:
    damping = b * (params.kd + params.kv)
    if damping <= 0:
        raise ValueError("b * (kd + kv) must be positive to form a region")
    dmax = delta_bound(env)
    return RegionSpec(
        c1=(b * params.kp - 1.0) / damping,
        threshold=dmax / damping,
        b=b,
        delta_max=dmax,
        params=params,
    )


def region_check(e1: float, e2: float, region: RegionSpec) -> Region:
    if abs(e2) < BOUNDARY_TOL:
        return Region.BOUNDARY
    v = region.c1 * e1 + e2
    if (e2 > 0 and v > region.threshold) or (e2 < 0 and v < -region.threshold):
        return Region.CONVERGING
    return Region.INACTIVE


def region_check_worst_case(e1: float, e2: float, params: CompensatorParams, env: BoundEnvelope) -> Region:
    """Converging only if dV/dt < 0 for every b in the envelope's b interval.

    The condition is affine in b, so checking both interval ends is enough.
    """
    if abs(e2) < BOUNDARY_TOL:
        return Region.BOUNDARY
    dmax = delta_bound(env)
    for b in env.b_range:
        if not vdot_worst_case(e1, e2, 0.0, dmax, params, b) < 0:
            return Region.INACTIVE
    return Region.CONVERGING


def region_map(region: RegionSpec, e1_range=(-30.0, 30.0), e2_range=(-30.0, 30.0), n: int = 61) -> list[tuple]:
    rows = []
    for e1 in np.linspace(*e1_range, n):
        for e2 in np.linspace(*e2_range, n):
            rows.append((float(e1), float(e2), region_check(e1, e2, region).value))
    return rows


@dataclass
class DescentReport:
    samples: int
    converging_samples: int
    violations: list[dict]
    first_point: dict | None = None

    @property
    def clean(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "converging_samples": self.converging_samples,
            "violations": self.violations,
            "clean": self.clean,
            "first_point": self.first_point,
        }


def error_signals(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    if traj.reference is None:
        raise ValueError("trajectory carries no reference response")
    e = traj.reference - traj.states
    return e[:, 0], e[:, 1]


def verify_descent(traj: Trajectory, region: RegionSpec, start: int = 0) -> DescentReport:
    """Check that V decreases over every step that starts in the Converging region.

    ``traj`` is a compensated run carrying the reference response. Samples
    before ``start`` are ignored (e.g. before a disturbance).
    """
    e1, e2 = error_signals(traj)
    V = 0.5 * (e1 * e1 + e2 * e2)
    violations = []
    converging = 0
    for k in range(start, len(V) - 1):
        if region_check(e1[k], e2[k], region) is Region.CONVERGING:
            converging += 1
            if not V[k + 1] < V[k]:
                violations.append({"index": k, "t": float(traj.t[k]), "V": float(V[k]), "V_next": float(V[k + 1])})
    first = None
    if start < len(V):
        first = {
            "index": start,
            "t": float(traj.t[start]),
            "e1": float(e1[start]),
            "e2": float(e2[start]),
            "region": region_check(e1[start], e2[start], region).value,
        }
    return DescentReport(len(V) - start, converging, violations, first)


def backsolve_input_caps(
    target_bound: float,
    a21_range,
    a22_range,
    b_range,
    d_max: float,
    position_cap: float,
    velocity_cap: float,
) -> float:
    """Common cap U on |u_base| and |u_r| making delta_bound equal ``target_bound``.

    Position and velocity caps are fixed by the caller; U solves the linear
    equation left over.
    """
    fixed = (
        _absmax(a21_range) * position_cap
        + _absmax(a22_range) * velocity_cap
        + 5.0 * position_cap
        + 3.0 * velocity_cap
        + d_max
    )
    slope = _absmax(b_range) + 1.0
    u = (target_bound - fixed) / slope
    if u < 0:
        raise ValueError("position/velocity caps already exceed the target bound")
    return u
