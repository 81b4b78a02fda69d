"""Command-line entry point.

Exit codes: 0 success, 1 collision or lateral-bound failure, 2 configuration
or usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..ga_solver import solve
from ..road_map import MapError, hausdorff_distance, load_map_file, read_points_file
from .config import ScenarioConfig, ScenarioError, load_scenario
from .loop import PlannerContext, obstacles_at, initial_state, run_scenario
from .outputs import emit_outputs, machine_descriptor

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def builtin_scenarios() -> list[str]:
    root = resources.files("gampc") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def resolve_scenario(name: str) -> Path:
    """A scenario path, or the name of a scenario shipped with the package."""
    p = Path(name)
    if p.exists():
        return p
    shipped = resources.files("gampc") / "scenarios" / (name if name.endswith(".ini") else name + ".ini")
    if shipped.is_file():
        return Path(str(shipped))
    raise ScenarioError(f"scenario {name!r} not found (shipped: {', '.join(builtin_scenarios())})")


def _load(args) -> ScenarioConfig:
    cfg = load_scenario(resolve_scenario(args.scenario), args.override)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out_dir(args, cfg: ScenarioConfig) -> Path:
    if args.out_dir:
        return Path(args.out_dir)
    return Path(cfg.run.out_dir)


def cmd_run(args) -> int:
    cfg = _load(args)
    log = run_scenario(cfg)
    paths = emit_outputs(log, _out_dir(args, cfg), prefix=cfg.run.name, extra={"seed": cfg.run.seed})
    summary = json.loads(paths["summary"].read_text())
    print(f"{cfg.run.name}: {summary['status']} ({log.termination}) steps={len(log)} "
          f"max|y|={summary.get('max_abs_y', float('nan')):.3f} "
          f"min_obs_dist={summary.get('min_obs_dist')} collision={log.collision}")
    if log.message:
        print(f"  {log.message}")
    print(f"  outputs in {paths['trajectory'].parent}")
    return EXIT_FAIL if log.failed else EXIT_OK


def cmd_fit_map(args) -> int:
    pts, header = read_points_file(args.points)
    road = load_map_file(args.points, ds=args.ds, cyclic=True if args.cyclic else None)
    dist = hausdorff_distance(road, pts)
    print(f"segments={len(road)} length={road.total_length:.3f} m cyclic={road.cyclic}")
    print(f"max distance (Hausdorff) = {dist:.4f} m")
    if args.output:
        road.dump(args.output)
        print(f"map written to {args.output}")
    if args.tolerance is not None and dist > args.tolerance:
        return EXIT_FAIL
    return EXIT_OK


def cmd_solve_once(args) -> int:
    cfg = _load(args)
    road = cfg.map.build(cfg.base_dir)
    ctx = PlannerContext.create(cfg, road)
    x0 = initial_state(cfg, road)
    problem = ctx.problem.with_obstacles(obstacles_at(cfg.obstacles, 0.0))
    sol = solve(x0, None, problem, cfg.ga, seed=np.random.SeedSequence([cfg.run.seed, 0]))
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.run.name}_fitness.txt"
    lines = ["# generation best_cost mean_cost"]
    lines += [f"{g} {1.0 / f!r} {m!r}" for g, (f, m) in enumerate(zip(sol.fitness_history, sol.mean_cost_history))]
    path.write_text("\n".join(lines) + "\n")
    a1, b1, a2, b2 = sol.best
    print(f"best cost {sol.best_cost:.6g} in {sol.solve_ms:.1f} ms")
    print(f"best ramp a1={a1:.6g} b1={b1:.6g} a2={a2:.6g} b2={b2:.6g}; first input u1={b1:.6g} u2={b2:.6g}")
    print(f"fitness history written to {path}")
    return EXIT_OK


def bench(cfg: ScenarioConfig, cycles: int) -> dict:
    """Closed-loop run of ``cycles`` planner cycles; returns timing statistics."""
    run = replace(cfg.run, duration=cycles * cfg.run.dt_cycle, laps=0.0, s_stop=None)
    log = run_scenario(replace(cfg, run=run))
    ms = np.asarray(log.solve_ms)
    return {"cycles": int(ms.size), "mean_ms": float(ms.mean()), "p95_ms": float(np.percentile(ms, 95)),
            "max_ms": float(ms.max()), "min_ms": float(ms.min()), "n_pop": cfg.ga.n_pop,
            "n_gen": cfg.ga.n_gen, "obstacles": len(cfg.obstacles), "termination": log.termination,
            "machine": machine_descriptor()}


def cmd_bench(args) -> int:
    cfg = _load(args)
    report = bench(cfg, args.cycles)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.run.name}_bench.json"
    path.write_text(json.dumps(report, indent=2) + "\n")
    print(f"{report['cycles']} cycles: mean {report['mean_ms']:.2f} ms, p95 {report['p95_ms']:.2f} ms, "
          f"max {report['max_ms']:.2f} ms on {report['machine']['cpu']}")
    print(f"report written to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gampc", description="GA-based MPC path planner simulations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="scenario file or shipped scenario name")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--out-dir", help="output directory (default: [run] out_dir)")
        p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a scenario value; repeatable")
        return p

    scenario_cmd("run", "closed-loop simulation").set_defaults(func=cmd_run)
    scenario_cmd("solve-once", "single GA solve with a fitness-history dump").set_defaults(func=cmd_solve_once)
    b = scenario_cmd("bench", "solver timing statistics over a closed-loop run")
    b.add_argument("--cycles", type=int, default=500)
    b.set_defaults(func=cmd_bench)

    f = sub.add_parser("fit-map", help="fit a road map to waypoints and report the Hausdorff distance")
    f.add_argument("points", help="waypoint file: optional 'ds=.. cyclic=..' header, then 'X Y' rows")
    f.add_argument("--ds", type=float, help="resampling step in metres (default: file header, else 4)")
    f.add_argument("--cyclic", action="store_true", help="treat the waypoints as a closed track")
    f.add_argument("--output", help="write the fitted map as JSON")
    f.add_argument("--tolerance", type=float, help="exit 1 when the distance exceeds this value")
    f.set_defaults(func=cmd_fit_map)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    if getattr(args, "cycles", 1) is not None and getattr(args, "cycles", 1) < 1:
        parser.print_usage(sys.stderr)
        print("gampc: error: --cycles must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ScenarioError, MapError) as e:
        print(f"gampc: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as e:
        print(f"gampc: error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
