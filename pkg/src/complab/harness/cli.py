"""Command line: simulate, design, analyze-region, compare, metrics."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from complab.controllers import CompensatorParams
from complab.harness.config import CompensatorSpec, ConfigError, DesignSpec, load_compare, load_json, load_scenario
from complab.metrics import step_metrics, tracking_stats


def _emit(doc) -> None:
    json.dump(doc, sys.stdout, indent=2, default=str)
    sys.stdout.write("\n")


def cmd_simulate(args) -> int:
    from complab.harness.run import run_scenario

    cfg = load_scenario(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    art = run_scenario(cfg, args.out, plot=not args.no_plot)
    _emit(art.summary())
    return 0 if art.fault is None else 1


def _client(args, cfg):
    if args.replay:
        from complab.designer import ReplayClient

        return ReplayClient.load(args.replay)
    if args.backend != "llm":
        return None
    from complab.designer import ChatClient, EndpointConfig, RecordingClient

    d = cfg.design
    client = ChatClient(EndpointConfig(d.base_url, d.model_name, d.temperature, d.timeout, d.max_retries))
    return RecordingClient(client) if args.record else client


def cmd_design(args) -> int:
    from complab.designer import LlmBackend, RuleBackend, SessionStatus
    from complab.harness.run import design, run_scenario

    cfg = load_scenario(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    overrides = {"backend": args.backend}
    if args.base_url:
        overrides["base_url"] = args.base_url
    if args.model:
        overrides["model_name"] = args.model
    if args.max_iter:
        overrides["max_iter"] = args.max_iter
    if args.tol:
        overrides["tol"] = args.tol
    cfg = replace(cfg, design=DesignSpec.from_dict({**cfg.design.__dict__, **overrides}), compensator=CompensatorSpec("designer"))
    client = _client(args, cfg)
    backend = RuleBackend() if args.backend == "rules" else LlmBackend(client)
    art = run_scenario(cfg, args.out, backend=backend, plot=not args.no_plot)
    if args.record and hasattr(client, "save"):
        client.save(args.record)
    s = art.session
    _emit(
        {
            **art.summary(),
            "iterations": len(s.iterations),
            "final_rmse": s.iterations[-1].run_stats.rmse if s.iterations else None,
        }
    )
    return 0 if s.status is not SessionStatus.FAULTED else 1


def _write_region_map(path: Path, rows) -> None:
    import csv
    import os
    import tempfile

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("e1", "e2", "region"))
        w.writerows(rows)
    os.replace(tmp, path)


def cmd_analyze_region(args) -> int:
    from complab.stability import BoundEnvelope, derive_region, paper_envelope, region_map, vdot_coefficients

    doc = load_json(args.config)
    extra = set(doc) - {"kp", "kd", "kv", "ki", "b", "envelope"}
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}")
    params = CompensatorParams.from_dict({k: doc[k] for k in ("kp", "kd", "kv", "ki") if k in doc})
    b = float(doc.get("b", 1.0))
    env = paper_envelope()
    if "envelope" in doc:
        e = doc["envelope"]
        env = BoundEnvelope.from_dict(load_json(e) if isinstance(e, str) else e)
    region = derive_region(params, env, b)
    coeffs = vdot_coefficients(params, b)
    out = {
        **region.to_dict(),
        "inequality": f"{region.c1:.2f} e1 + e2 > {region.threshold:.4g} (e2 > 0); < -{region.threshold:.4g} (e2 < 0)",
        "vdot_coefficients": {"e1e2": str(coeffs[0]), "e2^2": str(coeffs[1]), "e2I": str(coeffs[2])},
    }
    if args.out:
        from complab.designer.session import atomic_write_json

        atomic_write_json(Path(args.out) / "region.json", out)
        _write_region_map(Path(args.out) / "region_map.csv", region_map(region))
        out["region_map"] = str(Path(args.out) / "region_map.csv")
    _emit(out)
    return 0


def cmd_compare(args) -> int:
    from complab.harness.compare import compare_controllers

    cfg = load_compare(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    table = compare_controllers(cfg)
    if args.out:
        table.write(Path(args.out) / cfg.name)
    _emit(table.to_dict())
    return 0 if all(r["status"] == "ok" for r in table.rows) else 1


def cmd_metrics(args) -> int:
    from complab.harness.run import read_trajectory_csv

    traj = read_trajectory_csv(args.trajectory)
    out = {"unknown": step_metrics(traj).to_dict()}
    if traj.reference is not None:
        out["reference"] = step_metrics(traj, channel="reference").to_dict()
        out["tracking"] = tracking_stats(traj).to_dict()
    if args.out:
        from complab.designer.session import atomic_write_json

        atomic_write_json(Path(args.out) / "metrics.json", out)
    _emit(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="complab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", default=None, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="override the config seed")

    sp = sub.add_parser("simulate", help="run one scenario and write its artifact")
    sp.add_argument("config", help="scenario JSON file or preset name")
    sp.add_argument("--no-plot", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_simulate, out="runs")

    sp = sub.add_parser("design", help="refine a compensator for a scenario")
    sp.add_argument("config")
    sp.add_argument("--backend", choices=("llm", "rules"), default="rules")
    sp.add_argument("--base-url", default=None)
    sp.add_argument("--model", default=None)
    sp.add_argument("--max-iter", type=int, default=None)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--record", default=None, help="save the endpoint transcript here")
    sp.add_argument("--replay", default=None, help="answer from a recorded transcript instead of the network")
    sp.add_argument("--no-plot", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_design, out="runs")

    sp = sub.add_parser("analyze-region", help="convergence region for a gain set")
    sp.add_argument("config", help="JSON with kp, kd, kv, ki and optional b, envelope")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_analyze_region)

    sp = sub.add_parser("compare", help="controller comparison table")
    sp.add_argument("config")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("metrics", help="step metrics of a trajectory CSV")
    sp.add_argument("trajectory")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, KeyError, ValueError, RuntimeError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
