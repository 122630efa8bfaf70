"""Run every step/sinusoid/disturbance/mismatch preset and print one line per scenario.

    python scripts/run_fig3_suite.py [--out runs] [--workers 4] [--seed 7]
"""
import argparse
from dataclasses import dataclass

from complab.harness import load_scenario, run_suite


@dataclass(frozen=True)
class SuiteConfig:
    presets: tuple = ("fig3a", "fig3a-u2", "fig3b", "fig3b-2", "fig3c", "fig3d", "fig3e", "fig3f", "t2-indirect")
    workers: int = 4
    seed: int | None = None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=None, help="artifact directory (nothing is written when omitted)")
    ap.add_argument("--workers", type=int, default=SuiteConfig.workers)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    cfg = SuiteConfig(workers=args.workers, seed=args.seed)

    scenarios = [load_scenario(p) for p in cfg.presets]
    if cfg.seed is not None:
        scenarios = [s.with_seed(cfg.seed) for s in scenarios]
    results = run_suite(scenarios, args.out, workers=cfg.workers, plot=args.out is not None)
    print(f"{'scenario':<12} {'status':<8} {'rmse reduction':>15} {'design':<14}")
    for r in results:
        red = r.get("rmse_reduction")
        red = "-" if red is None else f"{100 * red:.1f}%"
        print(f"{r['name']:<12} {r['status']:<8} {red:>15} {r.get('session_status') or '-':<14}")
        if r.get("fault"):
            print(f"  fault: {r['fault']}")


if __name__ == "__main__":
    main()
