"""Command-line entry point: gen-env, plan, bench, feasibility, fit-rwta.

Exit codes: 0 on success, 1 on a domain failure (infeasible plan, blocked
goal) with a machine-readable JSON error on stderr, 2 on usage errors. All
subcommands are reproducible per seed; distances are meters, durations
accept 'ms'/'s' suffixes and default to seconds.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

from . import __version__
from .bench import NoiseModel, RunConfig, sweep
from .environment import (
    ForestSpec,
    GapWallSpec,
    Scenario,
    ShapeFieldSpec,
    gen_forest,
    gen_gap_wall,
    gen_pole,
    gen_shapes,
)
from .expert import ExpertConfig, label
from .feasibility import load_params, speed_table_row
from .multimodal import FitDivergedError, LabelSet, LossConfig, fit_hypotheses


class DomainFailure(RuntimeError):
    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


def parse_duration(text: str) -> float:
    """'10.3ms' -> 0.0103, '0.5s' -> 0.5, bare numbers are seconds."""
    t = text.strip()
    if t.endswith("ms"):
        return float(t[:-2]) / 1000.0
    if t.endswith("s"):
        return float(t[:-1])
    return float(t)


def _cmd_gen_env(args):
    if args.kind == "forest":
        scenario = gen_forest(ForestSpec(intensity=args.density, seed=args.seed,
                                         reference_kind=args.reference))
    elif args.kind == "shapes":
        scenario = gen_shapes(ShapeFieldSpec(intensity=args.density, seed=args.seed))
    elif args.kind == "gap":
        scenario = gen_gap_wall(GapWallSpec.draw(args.seed, mode=args.gap_mode))
    elif args.kind == "pole":
        scenario = gen_pole()
    else:  # argparse choices prevent this
        raise DomainFailure("usage", f"unknown kind {args.kind}")
    scenario.save(args.out)
    print(json.dumps({"out": args.out, "points": len(scenario.cloud),
                      "goal": scenario.goal.tolist()}))
    return 0


def _cmd_plan(args):
    scenario = Scenario.load(args.scenario)
    cfg = ExpertConfig(seed=args.seed).scaled(args.samples)
    lbl = label(scenario, cfg, use_global=not args.no_global, speed=args.speed)
    if not lbl.feasible:
        raise DomainFailure("infeasible", "no collision-free trajectory found")
    payload = {
        "trajectories": [_traj_csv(t) for t in lbl.trajectories],
        "costs": lbl.costs,
        "chain_stats": {"acceptance_rate": lbl.acceptance_rate},
    }
    with open(args.out, "w") as f:
        json.dump(payload, f, indent=2)
    print(json.dumps({"out": args.out, "n_trajectories": len(lbl.trajectories),
                      "best_cost": lbl.costs[0]}))
    return 0


def _traj_csv(traj) -> str:
    buf = io.StringIO()
    buf.write("t,x,y,z\n")
    for t, p in zip(traj.times, traj.positions):
        buf.write(f"{float(t)!r},{float(p[0])!r},{float(p[1])!r},{float(p[2])!r}\n")
    return buf.getvalue()


def _cmd_bench(args):
    noise = NoiseModel.flight_identified() if args.noise else None
    cfg = RunConfig(
        speeds=tuple(float(s) for s in args.speeds.split(",")),
        n_seeds=args.seeds,
        policy=args.policy,
        noise=noise,
        expert_samples=args.samples,
        replan_period=args.replan,
    )
    report = sweep(args.env, cfg, intensity=args.density, master_seed=args.seed,
                   threads=args.threads)
    report.to_json(args.out)
    if args.out.endswith(".json"):
        report.to_csv(args.out[: -len(".json")] + ".csv")
    print(json.dumps({"out": args.out, "aggregate": report.aggregate}))
    return 0


def _cmd_feasibility(args):
    t_p = parse_duration(args.t_p)
    if args.params:
        veh, sense_kw = load_params(args.params)
    else:
        veh, sense_kw = None, None
    row = speed_table_row(t_p, veh, sense_kw)
    print(json.dumps({k: round(v, 4) for k, v in row.items()}))
    return 0


def _cmd_fit_rwta(args):
    with open(args.labels) as f:
        obj = json.load(f)
    labels = LabelSet(obj["labels"] if isinstance(obj, dict) else obj)
    cfg = LossConfig()
    try:
        hyps, trace = fit_hypotheses(labels, args.modes, cfg, args.steps,
                                     args.step_size, seed=args.seed)
    except FitDivergedError as e:
        raise DomainFailure("diverged", str(e)) from e
    payload = {
        "hypotheses": hyps.positions.tolist(),
        "loss_trace": trace.tolist(),
        "modes": args.modes,
        "steps": args.steps,
        "seed": args.seed,
    }
    with open(args.out, "w") as f:
        json.dump(payload, f)
    print(json.dumps({"out": args.out, "final_loss": trace[-1]}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agileplan", description=__doc__)
    p.add_argument("--version", action="version", version=f"agileplan {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-env", help="generate a benchmark scenario directory")
    g.add_argument("--kind", required=True, choices=["forest", "shapes", "gap", "pole"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--density", type=float, default=1.0 / 25.0, help="obstacles per m^2")
    g.add_argument("--reference", choices=["line", "circle"], default="line")
    g.add_argument("--gap-mode", choices=["test", "train"], default="test")
    g.set_defaults(func=_cmd_gen_env)

    pl = sub.add_parser("plan", help="run the privileged planner on a scenario")
    pl.add_argument("--scenario", required=True)
    pl.add_argument("--samples", type=int, default=50000)
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--out", required=True)
    pl.add_argument("--speed", type=float, default=None, help="window speed, m/s")
    pl.add_argument("--no-global", action="store_true",
                    help="condition on the raw reference instead of a global plan")
    pl.set_defaults(func=_cmd_plan)

    b = sub.add_parser("bench", help="receding-horizon success-rate sweep")
    b.add_argument("--env", required=True, choices=["forest", "shapes", "gap", "pole"])
    b.add_argument("--density", type=float, default=1.0 / 25.0)
    b.add_argument("--speeds", default="3,5,7,10")
    b.add_argument("--seeds", type=int, default=10)
    b.add_argument("--seed", type=int, default=0, help="master seed")
    b.add_argument("--policy", choices=["expert", "expert_local", "blind"], default="expert")
    b.add_argument("--samples", type=int, default=2500, help="sampler budget per replan")
    b.add_argument("--replan", type=float, default=0.1)
    b.add_argument("--noise", action="store_true", help="enable the identified noise model")
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--out", required=True)
    b.set_defaults(func=_cmd_bench)

    f = sub.add_parser("feasibility", help="latency-limited maximum-speed table row")
    f.add_argument("--t-p", required=True, help="processing latency, e.g. 10.3ms")
    f.add_argument("--params", default=None, help="JSON overrides for model parameters")
    f.set_defaults(func=_cmd_feasibility)

    fr = sub.add_parser("fit-rwta", help="fit multi-hypothesis trajectories to labels")
    fr.add_argument("--labels", required=True)
    fr.add_argument("--modes", type=int, default=3)
    fr.add_argument("--steps", type=int, default=500)
    fr.add_argument("--step-size", type=float, default=0.01)
    fr.add_argument("--seed", type=int, default=0)
    fr.add_argument("--out", required=True)
    fr.set_defaults(func=_cmd_fit_rwta)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainFailure as e:
        print(json.dumps({"error": str(e), "kind": e.kind}), file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        parser.print_usage(sys.stderr)
        print(json.dumps({"error": str(e), "kind": "missing-file"}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
