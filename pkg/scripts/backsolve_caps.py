"""Back-solve magnitude caps that reproduce the 274.45 worst-case mismatch bound.

Coefficient ranges are the Unknown System 1 bounds (a21 in [-6.5, -0.5],
a22 in [-6, 0]); b is pinned to 1 and |d| <= 0.25. Position and velocity caps
are fixed at 10 mm and 10 mm/s; the common cap on |u_base| and |u_r| is the
remaining unknown.

    python scripts/backsolve_caps.py [--out src/complab/presets/paper_envelope.json]
"""
import argparse
import json
from pathlib import Path

from complab.stability import BoundEnvelope, backsolve_input_caps, delta_bound

TARGET = 274.45
DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "complab" / "presets" / "paper_envelope.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--position-cap", type=float, default=10.0)
    ap.add_argument("--velocity-cap", type=float, default=10.0)
    args = ap.parse_args()

    ranges = dict(a21_range=(-6.5, -0.5), a22_range=(-6.0, 0.0), b_range=(1.0, 1.0), d_max=0.25)
    u_cap = backsolve_input_caps(TARGET, **ranges, position_cap=args.position_cap, velocity_cap=args.velocity_cap)
    env = BoundEnvelope(
        **ranges,
        x1u_max=args.position_cap,
        x2u_max=args.velocity_cap,
        x1r_max=args.position_cap,
        x2r_max=args.velocity_cap,
        ubase_max=round(u_cap, 10),
        ur_max=round(u_cap, 10),
    )
    bound = delta_bound(env)
    doc = env.to_dict()
    doc["comment"] = (
        f"Caps back-solved by scripts/backsolve_caps.py: positions {args.position_cap}, "
        f"velocities {args.velocity_cap}, inputs {u_cap:.6g}; delta_bound = {bound:.6g}"
    )
    args.out.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"input cap U = {u_cap:.6g}; delta_bound = {bound:.10g} -> {args.out}")


if __name__ == "__main__":
    main()
