"""Gain sweep for the base sliding-mode controller on the reference plant.

Scores every (lam, k, gamma) triple on a 10 mm step by overshoot and 2%
settling time and prints the best candidates next to a baseline triple.

    python scripts/tune_reference_smc.py [--boundary-layer 0.1] [--top 10]
"""
import argparse
import itertools
from dataclasses import dataclass

from complab.controllers import SmcController, SmcGains
from complab.dynamics import Step, reference_system, simulate
from complab.metrics import step_metrics


@dataclass(frozen=True)
class SweepConfig:
    lams: tuple = (1.0, 2.0, 3.0, 5.0, 8.0)
    ks: tuple = (2.0, 10.0, 30.0, 60.0, 100.0)
    gammas: tuple = (0.1, 0.5, 1.0)
    boundary_layer: float | None = 0.1
    amplitude: float = 10.0
    horizon: float = 5.0
    max_overshoot: float = 1.0
    baseline: tuple = (5.0, 2.0, 1.0)


def score(cfg: SweepConfig, lam: float, k: float, gamma: float) -> dict:
    gains = SmcGains(lam, k, gamma, cfg.boundary_layer)
    traj = simulate(reference_system(), SmcController(gains), Step(cfg.amplitude), cfg.horizon)
    m = step_metrics(traj)
    return {
        "lam": lam,
        "k": k,
        "gamma": gamma,
        "overshoot": m.peak_overshoot,
        "settling": m.settling_time if m.settled else float("inf"),
        "sse": m.steady_state_error,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--boundary-layer", type=float, default=0.1)
    ap.add_argument("--top", type=int, default=10)
    args = ap.parse_args()
    cfg = SweepConfig(boundary_layer=args.boundary_layer or None)

    rows = [score(cfg, *g) for g in itertools.product(cfg.lams, cfg.ks, cfg.gammas)]
    ok = [r for r in rows if r["overshoot"] <= cfg.max_overshoot]
    ok.sort(key=lambda r: (r["settling"], r["overshoot"]))
    print(f"{len(ok)}/{len(rows)} triples with overshoot <= {cfg.max_overshoot}%")
    print(f"{'lam':>5} {'k':>6} {'gamma':>6} {'OS %':>7} {'Ts s':>7} {'sse':>9}")
    for r in ok[: args.top]:
        print(f"{r['lam']:5g} {r['k']:6g} {r['gamma']:6g} {r['overshoot']:7.2f} {r['settling']:7.3f} {r['sse']:9.2e}")
    b = score(cfg, *cfg.baseline)
    print(f"baseline {cfg.baseline}: overshoot {b['overshoot']:.1f}%, settling {b['settling']:.3f} s")


if __name__ == "__main__":
    main()
