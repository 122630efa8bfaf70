"""Iterations the rule-based designer needs on a preset, across noise seeds.

    python scripts/design_iterations.py [--preset fig3a] [--seeds 10]
"""
import argparse
from dataclasses import dataclass

import numpy as np

from complab.controllers import CompensatorParams
from complab.designer import RuleBackend, SessionStatus, refine_loop
from complab.harness import ScenarioRunner, load_scenario


@dataclass(frozen=True)
class IterationStudy:
    preset: str = "fig3a"
    seeds: int = 10
    first_seed: int = 0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default=IterationStudy.preset)
    ap.add_argument("--seeds", type=int, default=IterationStudy.seeds)
    args = ap.parse_args()
    study = IterationStudy(args.preset, args.seeds)

    base = load_scenario(study.preset)
    d = base.design
    counts = []
    for seed in range(study.first_seed, study.first_seed + study.seeds):
        cfg = base.with_seed(seed)
        s = refine_loop(ScenarioRunner(cfg), RuleBackend(), max_iter=d.max_iter, tol=d.tol, initial=CompensatorParams.from_dict(d.initial))
        last = s.iterations[-1]
        print(f"seed {seed:3d}: {s.status.value:<14} updates {last.index}  rmse {last.run_stats.rmse:.4f}  gains {last.proposal.to_dict()}")
        if s.status is SessionStatus.CONVERGED:
            counts.append(last.index)
    if counts:
        print(f"converged {len(counts)}/{study.seeds}; mean updates {np.mean(counts):.2f}")
    else:
        print("no seed converged")


if __name__ == "__main__":
    main()
