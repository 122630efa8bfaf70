"""Controller comparison under payload-like perturbations, and parallel scenario suites."""
from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from complab.controllers import CompensatedController, ReferenceModel
from complab.designer.session import atomic_write_json
from complab.dynamics import Trajectory, derive_seed, simulate
from complab.harness.config import CompareConfig, ScenarioConfig
from complab.harness.systems import make_controller, make_system
from complab.metrics import MetricsFault, step_metrics, tracking_stats

ROW_FIELDS = (
    "controller",
    "perturbation",
    "status",
    "rmse",
    "max_abs",
    "final_gap",
    "peak_overshoot",
    "settling_time",
    "steady_state_error",
    "rise_time",
    "fault",
)


@dataclass
class ComparisonTable:
    rows: list[dict] = field(default_factory=list)
    spread: dict[str, float] = field(default_factory=dict)
    trajectories: dict[tuple[str, str], Trajectory] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.rows)

    def row(self, controller: str, perturbation: str) -> dict:
        for r in self.rows:
            if r["controller"] == controller and r["perturbation"] == perturbation:
                return r
        raise KeyError((controller, perturbation))

    def to_dict(self) -> dict:
        return {"rows": self.rows, "spread": self.spread}

    def write(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_json(out_dir / "comparison.json", self.to_dict())
        tmp = out_dir / ".comparison.csv.tmp"
        with tmp.open("w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=ROW_FIELDS)
            w.writeheader()
            for r in self.rows:
                w.writerow(r)
        tmp.replace(out_dir / "comparison.csv")


def _row(label: str, pert: str, traj: Trajectory | None, fault: str | None) -> dict:
    row = dict.fromkeys(ROW_FIELDS)
    row.update(controller=label, perturbation=pert, status="Faulted" if fault else "ok", fault=fault)
    if traj is not None and not fault:
        row.update(tracking_stats(traj).to_dict())
        try:
            m = step_metrics(traj)
            row.update(
                peak_overshoot=m.peak_overshoot,
                settling_time=m.settling_time,
                steady_state_error=m.steady_state_error,
                rise_time=m.rise_time,
            )
        except MetricsFault:
            pass
    return row


def compare_controllers(cfg: CompareConfig) -> ComparisonTable:
    """Every entry under every perturbation, against the same reference response.

    ``spread`` is, per controller, the largest RMS difference between its
    position responses under two perturbations (how much the payload change
    shows through).
    """
    table = ComparisonTable()
    target = cfg.target.build()
    ref_plant = make_system("reference")
    for entry, pert in itertools.product(cfg.entries, cfg.perturbations):
        traj, fault = None, None
        try:
            plant = make_system(cfg.system, derive_seed(cfg.seed, f"{cfg.name}/{pert.label}"), pert.b_scale, pert.load)
            rc = cfg.reference_controller
            reference = ReferenceModel(make_controller(rc.kind, rc.gains), ref_plant)
            base = make_controller(entry.base_controller.kind, entry.base_controller.gains)
            ctl = CompensatedController(base, entry.compensator.fixed_params(), reference)
            traj = simulate(plant, ctl, target, cfg.horizon, cfg.dt)
            fault = traj.fault
        except Exception as exc:  # one broken controller must not sink the table
            fault = f"{type(exc).__name__}: {exc}"
        table.rows.append(_row(entry.label, pert.label, traj, fault))
        if traj is not None and not fault:
            table.trajectories[(entry.label, pert.label)] = traj
    for entry in cfg.entries:
        ys = [table.trajectories[(entry.label, p.label)].states[:, 0] for p in cfg.perturbations if (entry.label, p.label) in table.trajectories]
        pairs = [float(np.sqrt(np.mean((a - b) ** 2))) for a, b in itertools.combinations(ys, 2) if len(a) == len(b)]
        table.spread[entry.label] = max(pairs) if pairs else math.nan
    return table


# ---------------------------------------------------------------------------
# Suites


def _run_one(args) -> dict:
    from complab.harness.run import run_scenario

    cfg_dict, out_dir, plot = args
    cfg = ScenarioConfig.from_dict(cfg_dict)
    try:
        return run_scenario(cfg, out_dir, plot=plot).summary()
    except Exception as exc:
        return {"name": cfg.name, "status": "faulted", "fault": f"{type(exc).__name__}: {exc}"}


def run_suite(configs: Sequence[ScenarioConfig], out_dir: str | Path | None = None, workers: int | None = 1, plot: bool = True) -> list[dict]:
    """Run scenarios serially (workers=1) or in a process pool; results keep config order."""
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ValueError("scenario names in a suite must be unique")
    jobs = [(c.to_dict(), None if out_dir is None else str(out_dir), plot) for c in configs]
    if workers == 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))
