"""Scenario execution and self-describing run artifacts."""
from __future__ import annotations

import json
import math
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import complab
from complab.controllers import CompensatedController, CompensatorParams, ReferenceModel, SetpointShapingController
from complab.designer import (
    ChatClient,
    DesignSession,
    EndpointConfig,
    LlmBackend,
    RuleBackend,
    SessionStatus,
    refine_loop,
)
from complab.designer.session import atomic_write_json
from complab.dynamics import SimulationFault, Trajectory, derive_seed, simulate
from complab.harness.config import ControllerSpec, ScenarioConfig, TargetSpec
from complab.harness.plot import PlotStyle, Series, emit_plot
from complab.harness.systems import make_controller, make_system
from complab.metrics import MetricsFault, step_metrics, tracking_stats
from complab.stability import derive_region, paper_envelope, region_check, verify_descent

TRAJ_COLUMNS = ("t", "target", "x1_ref", "x2_ref", "x1_unk", "x2_unk", "u_base", "u_comp", "u_total")
RECOVERY_BAND = 0.05


class ScenarioRunner:
    """Builds plants and controllers for one config; calling it runs the unknown plant."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        seed = derive_seed(cfg.seed, cfg.name)
        self.plant = make_system(cfg.system, seed, cfg.b_scale, cfg.load)
        self.ref_plant = make_system(cfg.reference_system, derive_seed(cfg.seed, cfg.name + "/reference"))

    def controller(self, params: CompensatorParams | None, base: ControllerSpec | None = None):
        cfg = self.cfg
        base = base or cfg.base_controller
        reference = ReferenceModel(make_controller(base.kind, base.gains), self.ref_plant)
        inner = make_controller(base.kind, base.gains)
        if cfg.indirect_mode:
            bounds = cfg.shaping_bounds or (-math.inf, math.inf)
            return SetpointShapingController(inner, params, reference, bounds)
        return CompensatedController(inner, params, reference, cfg.integral_mode)

    def run(
        self,
        params: CompensatorParams | None,
        base: ControllerSpec | None = None,
        target: TargetSpec | None = None,
        horizon: float | None = None,
    ) -> Trajectory:
        cfg = self.cfg
        ctl = self.controller(params, base)
        traj = simulate(
            self.plant,
            ctl,
            (target or cfg.target).build(),
            horizon or cfg.horizon,
            cfg.dt,
            cfg.disturbances,
        )
        traj.clamp_events = getattr(ctl, "clamp_events", 0)
        return traj

    __call__ = run


# ---------------------------------------------------------------------------
# CSV


def trajectory_table(traj: Trajectory) -> np.ndarray:
    ref = traj.reference if traj.reference is not None else np.full((len(traj), 2), np.nan)
    return np.column_stack([traj.t, traj.target, ref, traj.states, traj.u_base, traj.u_comp, traj.u_total])


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    # %.17g round-trips every double, so re-runs can be compared bit for bit.
    np.savetxt(path, trajectory_table(traj), fmt="%.17g", delimiter=",", header=",".join(TRAJ_COLUMNS), comments="")


def read_trajectory_csv(path: str | Path) -> Trajectory:
    path = Path(path)
    with path.open() as f:
        header = f.readline().strip().split(",")
    if tuple(header) != TRAJ_COLUMNS:
        raise ValueError(f"{path}: expected columns {','.join(TRAJ_COLUMNS)}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] == 0:
        raise MetricsFault("empty trajectory")
    t = data[:, 0]
    dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
    ref = data[:, 2:4]
    return Trajectory(
        dt=dt,
        t=t,
        states=data[:, 4:6],
        u_base=data[:, 6],
        u_comp=data[:, 7],
        u_total=data[:, 8],
        target=data[:, 1],
        reference=None if np.isnan(ref).all() else ref,
    )


# ---------------------------------------------------------------------------
# Metrics documents


def run_summary(traj: Trajectory) -> dict:
    doc = {"fault": traj.fault, "samples": len(traj)}
    if len(traj) == 0:
        return doc
    if traj.reference is not None:
        doc["tracking"] = tracking_stats(traj).to_dict()
    for channel in ("unknown", "reference"):
        try:
            doc[f"step_{channel}"] = step_metrics(traj, channel=channel).to_dict()
        except MetricsFault:
            pass
    doc["clamp_events"] = getattr(traj, "clamp_events", 0)
    return doc


def sinusoid_report(traj: Trajectory, target: TargetSpec) -> dict:
    """Max |reference - unknown| after the first full period, relative to the amplitude."""
    period = 1.0 / target.frequency
    k = int(math.ceil(period / traj.dt - 1e-9))
    if k >= len(traj):
        return {"after": period, "max_deviation": None, "fraction_of_amplitude": None}
    dev = np.abs(traj.reference[k:, 0] - traj.states[k:, 0])
    m = float(dev.max())
    return {"after": period, "max_deviation": m, "fraction_of_amplitude": m / abs(target.amplitude)}


def recovery_report(traj: Trajectory, start: int, band: float) -> dict:
    dev = traj.reference[start:, 0] - traj.states[start:, 0]
    n_win = max(1, int(math.ceil(0.1 * len(dev))))
    outside = np.nonzero(np.abs(dev) > band)[0]
    if len(dev) == 0:
        reentry = None
    elif len(outside) == 0:
        reentry = float(traj.t[start])
    elif outside[-1] == len(dev) - 1:
        reentry = None
    else:
        reentry = float(traj.t[start + outside[-1] + 1])
    return {
        "band": band,
        "reentry_time": reentry,
        "recovered": reentry is not None and traj.fault is None,
        "final_gap": float(abs(np.mean(dev[-n_win:]))) if len(dev) else None,
        "fault": traj.fault,
    }


def event_index(cfg: ScenarioConfig) -> int | None:
    if not cfg.disturbances:
        return None
    return int(math.ceil(cfg.disturbances[0].time / cfg.dt - 1e-9))


def region_report(cfg: ScenarioConfig, params: CompensatorParams | None, comp: Trajectory | None) -> dict | None:
    if params is None or params.kd + params.kv <= 0:
        return None
    region = derive_region(params, paper_envelope())
    doc = {
        "region": region.to_dict(),
        "inequality": f"{region.c1:.4g} e1 + e2 > {region.threshold:.4g} (e2 > 0)",
        "envelope": paper_envelope().to_dict(),
    }
    k = event_index(cfg)
    if comp is not None and comp.reference is not None and len(comp):
        start = 0 if k is None else min(k, len(comp) - 1)
        e1 = float(comp.reference[start, 0] - comp.states[start, 0])
        e2 = float(comp.reference[start, 1] - comp.states[start, 1])
        doc["start_point"] = {"t": float(comp.t[start]), "e1": e1, "e2": e2, "region": region_check(e1, e2, region).value}
        doc["descent"] = verify_descent(comp, region, start).to_dict()
    return doc


# ---------------------------------------------------------------------------
# Design


def make_backend(cfg: ScenarioConfig, backend: str | None = None, client=None):
    name = backend or cfg.design.backend
    if name == "rules":
        return RuleBackend()
    if name == "llm":
        d = cfg.design
        if client is None:
            client = ChatClient(EndpointConfig(d.base_url, d.model_name, d.temperature, d.timeout, d.max_retries))
        return LlmBackend(client)
    raise ValueError(f"unknown backend {name!r}")


def design(cfg: ScenarioConfig, runner: ScenarioRunner | None = None, backend=None, session_path=None) -> DesignSession:
    runner = runner or ScenarioRunner(cfg)
    backend = backend if backend is not None and not isinstance(backend, str) else make_backend(cfg, backend)
    d = cfg.design
    return refine_loop(
        runner,
        backend,
        max_iter=d.max_iter,
        tol=d.tol,
        initial=CompensatorParams.from_dict(d.initial),
        session_path=session_path,
        config=cfg.to_dict(),
        nondeterministic=backend.name == "llm" and d.temperature > 0,
    )


# ---------------------------------------------------------------------------
# Artifacts


@dataclass
class RunArtifact:
    name: str
    path: Path | None
    config: dict
    metrics: dict
    region: dict | None
    params: CompensatorParams | None
    session: DesignSession | None = None
    fault: str | None = None
    version: str = complab.__version__
    trajectories: dict[str, Trajectory] = field(default_factory=dict, repr=False)

    @property
    def trajectory_path(self) -> Path | None:
        return None if self.path is None else self.path / "trajectory.csv"

    def summary(self) -> dict:
        return {
            "name": self.name,
            "path": None if self.path is None else str(self.path),
            "status": "faulted" if self.fault else "ok",
            "fault": self.fault,
            "params": None if self.params is None else self.params.to_dict(),
            "rmse_reduction": self.metrics.get("rmse_reduction"),
            "session_status": None if self.session is None else self.session.status.value,
        }


def _plot_series(traj_base: Trajectory, traj_comp: Trajectory | None) -> list[Series]:
    out = [Series("target", traj_base.t, traj_base.target, "target")]
    if traj_base.reference is not None:
        out.append(Series("reference", traj_base.t, traj_base.reference[:, 0], "reference"))
    out.append(Series("uncompensated", traj_base.t, traj_base.states[:, 0], "uncompensated"))
    if traj_comp is not None:
        out.append(Series("compensated", traj_comp.t, traj_comp.states[:, 0], "compensated"))
    return out


def _reduction(base: Trajectory, comp: Trajectory | None) -> float | None:
    if comp is None or base.reference is None or not len(base) or not len(comp):
        return None
    rb, rc = tracking_stats(base).rmse, tracking_stats(comp).rmse
    return None if rb == 0 else 1.0 - rc / rb


def _finalize_dir(tmp: Path, final: Path) -> None:
    if final.exists():
        old = final.with_name(f".{final.name}.old-{os.getpid()}")
        os.replace(final, old)
        os.replace(tmp, final)
        shutil.rmtree(old)
    else:
        os.replace(tmp, final)


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None, backend=None, plot: bool = True) -> RunArtifact:
    """Run reference, uncompensated and compensated responses and write the artifact directory.

    With ``out_dir=None`` nothing is written. Files go to a hidden staging
    directory that is renamed into place only after artifact.json is complete.
    """
    runner = ScenarioRunner(cfg)
    tmp = final = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        final = out_dir / cfg.name
        tmp = out_dir / f".{cfg.name}.partial-{os.getpid()}"
        if tmp.exists():
            shutil.rmtree(tmp)
        tmp.mkdir()

    fault = None
    session = None
    params = cfg.compensator.fixed_params()
    if cfg.compensator.source == "designer":
        session = design(cfg, runner, backend, None if tmp is None else tmp / "session.json")
        best = session.best
        params = None if best is None else best.proposal
        if session.status is SessionStatus.FAULTED:
            fault = f"design faulted: {session.fault}"

    baseline = runner.run(None)
    comp = runner.run(params) if params is not None else None
    trajs = {"baseline": baseline}
    if comp is not None:
        trajs["compensated"] = comp

    metrics: dict = {"runs": {k: run_summary(v) for k, v in trajs.items()}, "rmse_reduction": _reduction(baseline, comp)}
    if cfg.target.kind == "sinusoid":
        metrics["sinusoid"] = {k: sinusoid_report(v, cfg.target) for k, v in trajs.items() if v.reference is not None}
    k = event_index(cfg)
    if k is not None:
        band = RECOVERY_BAND * abs(cfg.target.amplitude)
        metrics["recovery"] = {name: recovery_report(v, min(k, len(v)), band) for name, v in trajs.items()}
    region = region_report(cfg, params, comp)

    if cfg.test_phase is not None:
        ph = cfg.test_phase
        tb = runner.run(None, ph.base_controller, ph.target, ph.horizon)
        tc = runner.run(params, ph.base_controller, ph.target, ph.horizon) if params is not None else None
        trajs["test_baseline"] = tb
        if tc is not None:
            trajs["test_compensated"] = tc
        metrics["test_phase"] = {
            "runs": {"baseline": run_summary(tb), **({"compensated": run_summary(tc)} if tc is not None else {})},
            "rmse_reduction": _reduction(tb, tc),
        }

    faults = [f"{k}: {v.fault}" for k, v in trajs.items() if v.fault and k in ("compensated", "test_compensated")]
    if faults and fault is None:
        fault = "; ".join(faults)

    art = RunArtifact(cfg.name, final, cfg.to_dict(), metrics, region, params, session, fault, trajectories=trajs)
    if tmp is None:
        return art

    main = comp if comp is not None else baseline
    write_trajectory_csv(main, tmp / "trajectory.csv")
    write_trajectory_csv(baseline, tmp / "baseline.csv")
    if "test_baseline" in trajs:
        write_trajectory_csv(trajs["test_baseline"], tmp / "test_baseline.csv")
    if "test_compensated" in trajs:
        write_trajectory_csv(trajs["test_compensated"], tmp / "test_trajectory.csv")
    atomic_write_json(tmp / "metrics.json", metrics)
    atomic_write_json(tmp / "region.json", region)
    if plot:
        emit_plot(_plot_series(baseline, comp), tmp / "plot.svg", PlotStyle(title=cfg.name))
    files = sorted(p.name for p in tmp.iterdir())
    atomic_write_json(
        tmp / "artifact.json",
        {
            "name": cfg.name,
            "version": art.version,
            "status": "faulted" if fault else "complete",
            "fault": fault,
            "config": art.config,
            "params": None if params is None else params.to_dict(),
            "files": files,
            "session": "session.json" if session is not None else None,
        },
    )
    _finalize_dir(tmp, final)
    return art


def load_artifact(path: str | Path) -> dict:
    return json.loads((Path(path) / "artifact.json").read_text())
