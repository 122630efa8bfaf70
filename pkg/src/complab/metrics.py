"""Step-response indicators, reference/unknown discrepancy and diagnosis labels."""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from complab.dynamics import Trajectory


class MetricsFault(ValueError):
    pass


@dataclass(frozen=True)
class ResponseMetrics:
    peak_overshoot: float
    settling_time: float
    steady_state_error: float
    rise_time: float
    max_error: float
    min_error: float
    amplitude: float
    settled: bool = True
    # Time from the step to 50% of the transition.
    delay_time: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ResponseMetrics":
        return cls(**d)


@dataclass(frozen=True)
class TrackingStats:
    rmse: float
    max_abs: float
    final_gap: float

    def to_dict(self) -> dict:
        return asdict(self)


def _crossing_time(t: np.ndarray, y: np.ndarray, level: float) -> float:
    """First time y reaches ``level`` (y assumed to start below it), linearly interpolated."""
    idx = np.nonzero(y >= level)[0]
    if len(idx) == 0:
        return math.inf
    k = idx[0]
    if k == 0:
        return float(t[0])
    y0, y1 = y[k - 1], y[k]
    return float(t[k - 1] + (level - y0) / (y1 - y0) * (t[k] - t[k - 1]))


def step_response_metrics(
    t: np.ndarray,
    y: np.ndarray,
    final_target: float,
    initial: float | None = None,
    settle_band: float = 0.02,
    ss_window: float = 0.1,
    start_time: float | None = None,
) -> ResponseMetrics:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) == 0:
        raise MetricsFault("empty trajectory")
    y0 = float(y[0]) if initial is None else float(initial)
    amplitude = final_target - y0
    if amplitude == 0:
        raise MetricsFault("step amplitude is zero")
    # Normalised so the step always rises from 0 to 1.
    yn = (y - y0) / amplitude
    err = final_target - y

    overshoot = max(0.0, float(yn.max()) - 1.0) * 100.0

    outside = np.nonzero(np.abs(yn - 1.0) > settle_band)[0]
    settled = True
    if len(outside) == 0:
        settling = float(t[0])
    elif outside[-1] == len(t) - 1:
        settled = False
        settling = float(t[-1])
    else:
        k = outside[-1]
        # Interpolate the band exit between samples k and k+1.
        a, b = abs(yn[k] - 1.0), abs(yn[k + 1] - 1.0)
        frac = (a - settle_band) / (a - b) if a != b else 1.0
        settling = float(t[k] + frac * (t[k + 1] - t[k]))

    rise = _crossing_time(t, yn, 0.9) - _crossing_time(t, yn, 0.1)
    t0 = float(t[0]) if start_time is None else float(start_time)
    delay = _crossing_time(t, yn, 0.5) - t0

    n_win = max(1, int(math.ceil(ss_window * len(t))))
    sse = float(np.mean(err[-n_win:]))
    return ResponseMetrics(
        peak_overshoot=overshoot,
        settling_time=settling,
        steady_state_error=sse,
        rise_time=float(rise),
        max_error=float(err.max()),
        min_error=float(err.min()),
        amplitude=float(amplitude),
        settled=settled,
        delay_time=float(delay),
    )


def step_metrics(traj: Trajectory, settle_band: float = 0.02, channel: str = "unknown") -> ResponseMetrics:
    """Table-style indicators of one step response; ``channel`` is "unknown" or "reference"."""
    if len(traj) == 0:
        raise MetricsFault("empty trajectory")
    if channel == "reference":
        if traj.reference is None:
            raise MetricsFault("trajectory has no reference channel")
        y = traj.reference[:, 0]
    else:
        y = traj.states[:, 0]
    final = float(traj.target[-1])
    # The step instant is the first sample already commanding the final value.
    start = float(traj.t[np.argmax(traj.target == final)])
    return step_response_metrics(traj.t, y, final, initial=float(y[0]), settle_band=settle_band, start_time=start)


def compare_positions(y_ref: np.ndarray, y_unk: np.ndarray, final_window: float = 0.1) -> TrackingStats:
    y_ref = np.asarray(y_ref, dtype=float)
    y_unk = np.asarray(y_unk, dtype=float)
    if y_ref.shape != y_unk.shape:
        raise ValueError("position series must have equal length")
    dev = y_ref - y_unk
    n_win = max(1, int(math.ceil(final_window * len(dev))))
    return TrackingStats(
        rmse=float(np.sqrt(np.mean(dev * dev))),
        max_abs=float(np.max(np.abs(dev))),
        final_gap=float(np.mean(dev[-n_win:])),
    )


def _resample(traj: Trajectory, t_new: np.ndarray) -> np.ndarray:
    return np.interp(t_new, traj.t, traj.states[:, 0])


def compare_responses(traj_ref: Trajectory, traj_unknown: Trajectory) -> TrackingStats:
    """Position discrepancy y_ref - y_unk; the unknown run is resampled onto the reference grid if needed."""
    y_ref = traj_ref.states[:, 0]
    if len(traj_ref) == len(traj_unknown) and traj_ref.dt == traj_unknown.dt:
        y_unk = traj_unknown.states[:, 0]
    else:
        y_unk = _resample(traj_unknown, traj_ref.t)
    return compare_positions(y_ref, y_unk)


def tracking_stats(traj: Trajectory, start: int = 0) -> TrackingStats:
    """Discrepancy between the logged reference response and the plant, from sample ``start``."""
    if traj.reference is None:
        raise MetricsFault("trajectory has no reference channel")
    return compare_positions(traj.reference[start:, 0], traj.states[start:, 0])


class Diagnosis(str, enum.Enum):
    OVERSHOOTING = "Overshooting"
    SLUGGISH = "Sluggish"
    STEADY_STATE_BIAS = "SteadyStateBias"
    MATCHED = "Matched"


@dataclass(frozen=True)
class DiagnosisThresholds:
    overshoot_points: float = 5.0
    rise_ratio: float = 1.25
    bias_fraction: float = 0.02
    # Unknown reaching 50% this much earlier than the reference counts as under-damped.
    lead_ratio: float = 1.1


def lead_factor(m_ref: ResponseMetrics, m_unk: ResponseMetrics) -> float:
    """How many times earlier the unknown crosses 50% than the reference (nan if undefined)."""
    if not (m_unk.delay_time > 0 and math.isfinite(m_ref.delay_time)):
        return math.nan
    return m_ref.delay_time / m_unk.delay_time


def diagnose(m_ref: ResponseMetrics, m_unk: ResponseMetrics, th: DiagnosisThresholds = DiagnosisThresholds()) -> frozenset:
    labels = set()
    if m_unk.peak_overshoot - m_ref.peak_overshoot > th.overshoot_points:
        labels.add(Diagnosis.OVERSHOOTING)
    if lead_factor(m_ref, m_unk) > th.lead_ratio:
        labels.add(Diagnosis.OVERSHOOTING)
    # Written as a product so that zero and infinite rise times compare sanely.
    if m_unk.rise_time > th.rise_ratio * m_ref.rise_time:
        labels.add(Diagnosis.SLUGGISH)
    if abs(m_unk.steady_state_error - m_ref.steady_state_error) > th.bias_fraction * abs(m_unk.amplitude):
        labels.add(Diagnosis.STEADY_STATE_BIAS)
    return frozenset(labels) if labels else frozenset({Diagnosis.MATCHED})
