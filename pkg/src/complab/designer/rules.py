"""Deterministic rule-based designer encoding the diagnosis -> correction reasoning.

Each triggered label grows its gain group by (growth - 1) times the group's
current value (or a floor when the group is still near zero), scaled by how far
the indicator is past its threshold, capped at ``max_severity``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from complab.controllers import AdaptivePidParams, CompensatorParams
from complab.metrics import Diagnosis, DiagnosisThresholds, ResponseMetrics, lead_factor


@dataclass(frozen=True)
class RuleConfig:
    growth: float = 1.5
    max_severity: float = 2.0
    kp_floor: float = 1.0
    damping_floor: float = 1.0
    ki_floor: float = 0.5
    thresholds: DiagnosisThresholds = field(default_factory=DiagnosisThresholds)


def _severity(excess: float, cfg: RuleConfig) -> float:
    if not math.isfinite(excess):
        return cfg.max_severity
    return min(max(excess, 1.0), cfg.max_severity)


def overshoot_severity(m_ref: ResponseMetrics, m_unk: ResponseMetrics, cfg: RuleConfig) -> float:
    th = cfg.thresholds
    over = (m_unk.peak_overshoot - m_ref.peak_overshoot) / th.overshoot_points
    lead = lead_factor(m_ref, m_unk)
    lead = lead / th.lead_ratio if math.isfinite(lead) else 0.0
    return _severity(max(over, lead), cfg)


def sluggish_severity(m_ref: ResponseMetrics, m_unk: ResponseMetrics, cfg: RuleConfig) -> float:
    if m_ref.rise_time <= 0:
        return cfg.max_severity
    return _severity(m_unk.rise_time / m_ref.rise_time / cfg.thresholds.rise_ratio, cfg)


def bias_severity(m_ref: ResponseMetrics, m_unk: ResponseMetrics, cfg: RuleConfig) -> float:
    band = cfg.thresholds.bias_fraction * abs(m_unk.amplitude)
    if band == 0:
        return cfg.max_severity
    return _severity(abs(m_unk.steady_state_error - m_ref.steady_state_error) / band, cfg)


def rule_based_design(
    diag: frozenset,
    m_ref: ResponseMetrics,
    m_unk: ResponseMetrics,
    current: CompensatorParams,
    cfg: RuleConfig = RuleConfig(),
) -> CompensatorParams:
    step = cfg.growth - 1.0
    dkp = dkd = dkv = dki = 0.0
    if Diagnosis.OVERSHOOTING in diag:
        group = current.kd + current.kv
        grow = step * max(group, cfg.damping_floor) * overshoot_severity(m_ref, m_unk, cfg)
        # Split between kd and kv in their current proportion.
        share = current.kd / group if group > 0 else 0.5
        dkd, dkv = grow * share, grow * (1.0 - share)
    if Diagnosis.SLUGGISH in diag:
        dkp = step * max(current.kp, cfg.kp_floor) * sluggish_severity(m_ref, m_unk, cfg)
    if Diagnosis.STEADY_STATE_BIAS in diag:
        dki = step * max(current.ki, cfg.ki_floor) * bias_severity(m_ref, m_unk, cfg)
    return CompensatorParams(dkp, dkd, dkv, dki)


def rule_based_direct_design(
    diag: frozenset,
    m_ref: ResponseMetrics,
    m_unk: ResponseMetrics,
    current: AdaptivePidParams,
    cfg: RuleConfig = RuleConfig(),
) -> AdaptivePidParams:
    """Same reasoning applied to the PID template; adaptation rates are left alone."""
    step = cfg.growth - 1.0
    dkp = dki = dkd = 0.0
    if Diagnosis.OVERSHOOTING in diag:
        dkd = step * max(current.kd, cfg.damping_floor) * overshoot_severity(m_ref, m_unk, cfg)
    if Diagnosis.SLUGGISH in diag:
        dkp = step * max(current.kp, cfg.kp_floor) * sluggish_severity(m_ref, m_unk, cfg)
    if Diagnosis.STEADY_STATE_BIAS in diag:
        dki = step * max(current.ki, cfg.ki_floor) * bias_severity(m_ref, m_unk, cfg)
    return AdaptivePidParams(dkp, dki, dkd, 0.0, 0.0, 0.0)
