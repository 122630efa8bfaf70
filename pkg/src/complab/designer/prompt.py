"""Deterministic prompt construction for the compensator and direct-controller modes."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from complab.dynamics import SystemKind, SystemSpec, Trajectory
from complab.metrics import MetricsFault, ResponseMetrics, TrackingStats, step_metrics, tracking_stats

MAX_POINTS = 200

SYSTEM_MESSAGE = (
    "You are a control engineer. You tune an additive compensator so that an unknown "
    "plant reproduces the response of a well-understood reference system."
)

COMPENSATOR_TASK = """\
An existing fixed controller drives both a reference plant and an unknown plant toward the same target.
The unknown plant receives an extra additive term

    u_comp = kp * e1 + (kd + kv) * e2 + ki * I

where e1 = x1_ref - x1_unk, e2 = x2_ref - x2_unk and I is the running integral of (target - x1_unk).
Goal: make the unknown position response match the reference position response.
Propose an incremental change to the current gains.
Reply with a single JSON object and nothing else:
{"kp": <delta>, "kd": <delta>, "kv": <delta>, "ki": <delta>, "rationale": "<one sentence>"}"""

DIRECT_TASK = """\
Design an adaptive controller from scratch for the plant described below.
The controller template is a PID law whose gains adapt online with the MIT rule:

    u = kp * e + ki * int(e) + kd * e'
    kp' = gamma_p * e * e,  ki' = gamma_i * e * int(e),  kd' = gamma_d * e * e'

with e = target - y. Goal: the closed loop should reproduce the reference response.
Propose an incremental change to the current parameters.
Reply with a single JSON object and nothing else:
{"kp": <delta>, "ki": <delta>, "kd": <delta>, "gamma_p": <delta>, "gamma_i": <delta>, "gamma_d": <delta>, "rationale": "<one sentence>"}"""


def fmt(v: float) -> str:
    """Fixed 6-significant-digit formatting used for every number in a prompt."""
    if not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    s = f"{v:.6g}"
    return "0" if s == "-0" else s


def downsample(t: np.ndarray, y: np.ndarray, max_points: int = MAX_POINTS) -> list[tuple[float, float]]:
    """Fixed-stride subsample keeping at most ``max_points`` (t, y) pairs."""
    n = len(t)
    if n == 0:
        return []
    stride = max(1, math.ceil(n / max_points))
    idx = range(0, n, stride)
    return [(float(t[i]), float(y[i])) for i in idx]


@dataclass
class DesignPrompt:
    task_text: str
    ref_samples: list[tuple[float, float]] = field(default_factory=list)
    unk_samples: list[tuple[float, float]] = field(default_factory=list)
    metric_summary: tuple[ResponseMetrics | None, ResponseMetrics | None] = (None, None)
    qualitative_notes: str = ""
    context: list[str] = field(default_factory=list)

    def render(self) -> str:
        lines = [self.task_text, ""]
        lines.extend(self.context)
        m_ref, m_unk = self.metric_summary
        for label, m in (("reference", m_ref), ("unknown", m_unk)):
            if m is None:
                continue
            lines.append(f"Step metrics ({label}):")
            for k, v in asdict(m).items():
                lines.append(f"  {k}: {v if isinstance(v, bool) else fmt(v)}")
        for label, samples in (("reference", self.ref_samples), ("unknown", self.unk_samples)):
            if not samples:
                continue
            lines.append(f"Position samples ({label}), t,y:")
            lines.append(" ".join(f"{fmt(t)},{fmt(y)}" for t, y in samples))
        if self.qualitative_notes:
            lines.append(f"Notes: {self.qualitative_notes}")
        return "\n".join(lines) + "\n"

    def messages(self) -> list[dict[str, str]]:
        return [{"role": "system", "content": SYSTEM_MESSAGE}, {"role": "user", "content": self.render()}]


def _position(traj: Trajectory, channel: str) -> np.ndarray:
    if channel == "reference" and traj.reference is not None:
        return traj.reference[:, 0]
    return traj.states[:, 0]


def _metrics_or_none(traj: Trajectory, channel: str) -> ResponseMetrics | None:
    try:
        return step_metrics(traj, channel=channel)
    except MetricsFault:
        return None


def build_prompt(session, ref_traj: Trajectory, unk_traj: Trajectory, notes: str = "", max_points: int = MAX_POINTS) -> DesignPrompt:
    """Prompt for one compensator-refinement round.

    ``ref_traj`` supplies the reference response (its logged reference
    channel when present), ``unk_traj`` the unknown response. Both may be the
    same compensated trajectory. ``session`` may be None for a first round.
    """
    if len(ref_traj) == 0 or len(unk_traj) == 0:
        raise ValueError("trajectories must be nonempty")
    ref_ch = "reference" if ref_traj.reference is not None else "unknown"
    context = []
    if session is not None and session.iterations:
        context.append("Previous rounds (gains -> rmse):")
        for it in session.iterations:
            g = " ".join(f"{k}={fmt(v)}" for k, v in it.proposal.to_dict().items())
            context.append(f"  #{it.index}: {g} -> {fmt(it.run_stats.rmse)}")
    if session is not None and session.current is not None:
        g = " ".join(f"{k}={fmt(v)}" for k, v in session.current.to_dict().items())
        context.append(f"Current gains: {g}")
    if ref_traj.reference is not None and unk_traj is ref_traj:
        s = tracking_stats(ref_traj)
        context.append(f"Deviation reference-unknown: rmse={fmt(s.rmse)} max_abs={fmt(s.max_abs)} final_gap={fmt(s.final_gap)}")
    if context:
        context.append("")
    return DesignPrompt(
        task_text=COMPENSATOR_TASK,
        ref_samples=downsample(ref_traj.t, _position(ref_traj, ref_ch), max_points),
        unk_samples=downsample(unk_traj.t, _position(unk_traj, "unknown"), max_points),
        metric_summary=(_metrics_or_none(ref_traj, ref_ch), _metrics_or_none(unk_traj, "unknown")),
        qualitative_notes=notes,
        context=context,
    )


# ---------------------------------------------------------------------------
# Direct-controller mode

_EQUATIONS = {
    SystemKind.REFERENCE: ("x1' = x2", "x2' = -5 x1 - 3 x2 + u"),
    SystemKind.UNKNOWN1: (
        "x1' = x2",
        "x2' = (-3.5 + 3 sin(0.5 x1)) x1 + (-3 + 3 cos(0.2 x2)) x2 + (2 + 2 sin(x1)) u - 0.2 sin(x1) + 0.05 xi(t)",
    ),
    SystemKind.UNKNOWN2: (
        "x1' = x2",
        "x2' = (-4 + 2 sin(x1)) x1 + (-10 + 3 tanh(0.2 x2)) x2 + (0.8 + 0.2 cos(x1)) u - 0.2 sin(x1) + 0.5 xi(t)",
    ),
    SystemKind.MISMATCH_U3: ("x1' = x2 + 0.7 u", "x2' = -4 x1 - 3 x2 + 0.5 u"),
}


@dataclass(frozen=True)
class SystemDescription:
    name: str
    state_equations: tuple[str, ...]
    output_equation: str = "y = x1"
    notes: str = ""

    def to_text(self) -> str:
        body = "\n".join(f"  {eq}" for eq in self.state_equations)
        text = f"System {self.name}:\n{body}\n  {self.output_equation}\n"
        if self.notes:
            text += f"  ({self.notes})\n"
        return text

    def to_dict(self) -> dict:
        return {"name": self.name, "state_equations": list(self.state_equations), "output_equation": self.output_equation, "notes": self.notes}

    @classmethod
    def from_dict(cls, d: dict) -> "SystemDescription":
        return cls(d["name"], tuple(d["state_equations"]), d.get("output_equation", "y = x1"), d.get("notes", ""))


def describe_system(spec: SystemSpec, equations: Sequence[str] | None = None) -> SystemDescription:
    """Text form of x' = f(x, u), y = h(x); custom plants must pass their equations."""
    if equations is None:
        if spec.kind not in _EQUATIONS:
            raise ValueError(f"no text equations known for {spec.name}; pass them explicitly")
        equations = _EQUATIONS[spec.kind]
    notes = "xi(t) is uniform noise in [-1, 1]" if spec.disturbance.has_noise else ""
    return SystemDescription(spec.name, tuple(equations), notes=notes)


def direct_controller_prompt(
    system: SystemDescription,
    existing_controller: str,
    current=None,
    ref_traj: Trajectory | None = None,
    max_points: int = MAX_POINTS,
) -> DesignPrompt:
    context = [system.to_text(), f"Existing controller: {existing_controller}"]
    if current is not None:
        context.append("Current parameters: " + " ".join(f"{k}={fmt(v)}" for k, v in current.to_dict().items()))
    context.append("")
    ref_samples, unk_samples, summary = [], [], (None, None)
    if ref_traj is not None and len(ref_traj):
        ref_ch = "reference" if ref_traj.reference is not None else "unknown"
        ref_samples = downsample(ref_traj.t, _position(ref_traj, ref_ch), max_points)
        unk_samples = downsample(ref_traj.t, _position(ref_traj, "unknown"), max_points)
        summary = (_metrics_or_none(ref_traj, ref_ch), _metrics_or_none(ref_traj, "unknown"))
    return DesignPrompt(DIRECT_TASK, ref_samples, unk_samples, summary, "", context)
