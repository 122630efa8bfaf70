"""Print the payload comparison table (fixed PID, direct adaptive, MRAC, compensated).

    python scripts/compare_controllers.py [--config compare5] [--out runs]
"""
import argparse
import math

from complab.harness import compare_controllers, load_compare


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="compare5", help="comparison JSON file or preset name")
    ap.add_argument("--out", default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    cfg = load_compare(args.config)
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    table = compare_controllers(cfg)
    print(f"{'controller':<16} {'payload':<10} {'rmse':>8} {'OS %':>7} {'Ts s':>7} {'sse':>9}")
    for r in table.rows:
        if r["status"] != "ok":
            print(f"{r['controller']:<16} {r['perturbation']:<10} FAULT {r['fault']}")
            continue
        print(
            f"{r['controller']:<16} {r['perturbation']:<10} {r['rmse']:8.3f} "
            f"{r['peak_overshoot']:7.2f} {r['settling_time']:7.3f} {r['steady_state_error']:9.2e}"
        )
    print("spread across payloads (max pairwise position RMS):")
    for name, v in table.spread.items():
        print(f"  {name:<16} {'nan' if math.isnan(v) else f'{v:.3f}'}")
    if args.out:
        table.write(f"{args.out}/{cfg.name}")


if __name__ == "__main__":
    main()
