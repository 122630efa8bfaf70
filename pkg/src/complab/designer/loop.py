"""Iterative refinement: simulate, measure, ask a backend for a delta, apply it."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from complab.controllers import AdaptivePidParams, CompensatorParams
from complab.designer.client import EndpointFault
from complab.designer.prompt import SystemDescription, build_prompt, direct_controller_prompt
from complab.designer.proposal import ParseFault, parse_structured
from complab.designer.rules import RuleConfig, rule_based_design, rule_based_direct_design
from complab.designer.session import PARAM_TYPES, DesignMode, DesignSession, Iteration, SessionStatus
from complab.dynamics import SimulationFault, Trajectory
from complab.metrics import MetricsFault, TrackingStats, diagnose, step_metrics, tracking_stats

DEFAULT_INITIAL = CompensatorParams(kp=1.0, kd=0.5, kv=0.5, ki=0.0)

PARSE_RETRY_NOTE = "The previous reply could not be parsed. Reply with the JSON object only."


@dataclass
class Proposal:
    prompt: str
    raw_reply: str
    delta: CompensatorParams | AdaptivePidParams
    labels: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


class RuleBackend:
    """Offline backend: diagnosis labels mapped to fixed gain corrections. Never touches the network."""

    name = "rules"

    def __init__(self, cfg: RuleConfig = RuleConfig(), mode: DesignMode = DesignMode.COMPENSATOR):
        self.cfg = cfg
        self.mode = mode
        self.audit: list[dict] = []

    def propose(self, session: DesignSession, traj: Trajectory, params) -> Proposal:
        prompt = build_prompt(session, traj, traj).render()
        m_ref = step_metrics(traj, channel="reference")
        m_unk = step_metrics(traj)
        diag = diagnose(m_ref, m_unk, self.cfg.thresholds)
        if self.mode is DesignMode.COMPENSATOR:
            delta = rule_based_design(diag, m_ref, m_unk, params, self.cfg)
        else:
            delta = rule_based_direct_design(diag, m_ref, m_unk, params, self.cfg)
        labels = sorted(d.value for d in diag)
        raw = json.dumps({**delta.to_dict(), "rationale": "diagnosis: " + ", ".join(labels)})
        return Proposal(prompt, raw, delta, labels)


class LlmBackend:
    """Queries a chat endpoint and parses the reply, re-asking after malformed replies."""

    name = "llm"

    def __init__(
        self,
        client,
        mode: DesignMode = DesignMode.COMPENSATOR,
        parse_retries: int = 2,
        notes: str = "",
        system: SystemDescription | None = None,
        existing_controller: str = "",
    ):
        if mode is DesignMode.DIRECT and system is None:
            raise ValueError("direct mode needs a system description")
        self.client = client
        self.mode = mode
        self.parse_retries = parse_retries
        self.notes = notes
        self.system = system
        self.existing_controller = existing_controller

    @property
    def audit(self) -> list[dict]:
        return getattr(self.client, "log", [])

    def propose(self, session: DesignSession, traj: Trajectory, params) -> Proposal:
        if self.mode is DesignMode.COMPENSATOR:
            prompt = build_prompt(session, traj, traj, self.notes)
        else:
            prompt = direct_controller_prompt(self.system, self.existing_controller, params, traj)
        messages = prompt.messages()
        errors = []
        raw = ""
        for _ in range(self.parse_retries + 1):
            raw = self.client.complete(messages)
            try:
                delta, _ = parse_structured(raw, PARAM_TYPES[self.mode])
            except ParseFault as exc:
                errors.append(str(exc))
                messages = messages + [
                    {"role": "assistant", "content": raw},
                    {"role": "user", "content": PARSE_RETRY_NOTE},
                ]
                continue
            return Proposal(prompt.render(), raw, delta, [], errors)
        fault = ParseFault(f"{len(errors)} unparsable replies: {errors[-1]}", raw)
        fault.errors = errors
        raise fault


def _is_zero(p) -> bool:
    return all(v == 0 for v in p.as_tuple())


def refine_loop(
    scenario: Callable[[object], Trajectory],
    backend,
    max_iter: int = 10,
    tol: float = 0.25,
    initial=None,
    session_path: str | Path | None = None,
    mode: DesignMode = DesignMode.COMPENSATOR,
    config: dict | None = None,
    rise_limit: float = 1.25,
    max_halvings: int = 3,
    nondeterministic: bool = False,
) -> DesignSession:
    """Run the design cycle until rmse < tol or ``max_iter`` proposals were simulated.

    ``scenario(params)`` must return a trajectory carrying the reference
    response. Iteration i records the proposal simulated at round i and the
    (possibly halved) delta that produced proposal i + 1, so
    proposal[i + 1] == proposal[i] + delta[i] holds exactly.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if initial is None:
        if mode is not DesignMode.COMPENSATOR:
            raise ValueError("direct mode needs explicit initial parameters")
        initial = DEFAULT_INITIAL
    session = DesignSession(mode=mode, config=dict(config or {}), backend=backend.name, nondeterministic=nondeterministic)
    session.config.setdefault("loop", {"max_iter": max_iter, "tol": tol, "rise_limit": rise_limit, "max_halvings": max_halvings})

    def persist():
        if session_path is not None:
            doc = session.to_dict()
            doc["audit"] = list(getattr(backend, "audit", []))
            from complab.designer.session import atomic_write_json

            atomic_write_json(session_path, doc)

    def evaluate(params):
        try:
            traj = scenario(params)
        except SimulationFault as exc:
            return None, None, str(exc)
        if traj.fault is not None:
            return None, None, traj.fault
        return traj, tracking_stats(traj), None

    def finish(status, fault=None):
        session.status = status
        session.fault = fault
        persist()
        return session

    params = initial
    traj, stats, err = evaluate(params)
    if err is not None:
        return finish(SessionStatus.FAULTED, f"initial simulation failed: {err}")

    for i in range(max_iter):
        session.current = params
        it = Iteration(i, params, stats)
        if stats.rmse < tol:
            session.append(it, max_iter)
            return finish(SessionStatus.CONVERGED)
        if i == max_iter - 1:
            session.append(it, max_iter)
            return finish(SessionStatus.MAX_ITERATIONS)
        try:
            prop = backend.propose(session, traj, params)
        except (ParseFault, EndpointFault, MetricsFault) as exc:
            it.errors = list(getattr(exc, "errors", [str(exc)]))
            it.raw_reply = getattr(exc, "raw", "")
            session.append(it, max_iter)
            return finish(SessionStatus.FAULTED, f"{type(exc).__name__}: {exc}")
        it.prompt, it.raw_reply, it.labels, it.errors = prop.prompt, prop.raw_reply, prop.labels, prop.errors

        delta = prop.delta
        if _is_zero(delta):
            cand, ctraj, cstats, err = params + delta, traj, stats, None
        else:
            cand = params + delta
            ctraj, cstats, err = evaluate(cand)
        halvings = 0
        # Bounded backtracking: shrink the step while it faults or worsens rmse too much.
        while (err is not None or cstats.rmse > rise_limit * stats.rmse) and halvings < max_halvings:
            delta = delta * 0.5
            halvings += 1
            cand = params + delta
            ctraj, cstats, err = evaluate(cand)
        it.delta, it.halvings = delta, halvings
        if err is not None:
            it.errors.append(err)
            session.append(it, max_iter)
            return finish(SessionStatus.FAULTED, f"simulation fault: {err}")
        session.append(it, max_iter)
        persist()
        params, traj, stats = cand, ctraj, cstats
    raise AssertionError("unreachable")


def stats_or_nan(traj: Trajectory | None) -> TrackingStats:
    if traj is None:
        return TrackingStats(math.nan, math.nan, math.nan)
    return tracking_stats(traj)
