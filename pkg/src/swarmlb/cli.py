"""Command-line front end: run scenarios, compare strategies, inspect plans."""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from .global_index import InvalidConfiguration, init_partitioning
from .report import compare_rows, rows_to_csv, write_run_outputs
from .scenario import BUILTIN_SCENARIOS, load_scenario, parse_grid, scenario_to_text
from .sim.config import STRATEGIES, StrategyConfig
from .sim.engine import Simulation, stats_bytes

OUT_ENV = "SWARMLB_OUT"
DEFAULT_OUT = "swarm_out"


def _out_dir(arg: str | None) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _window(text: str) -> float:
    return math.inf if text.lower() in ("inf", "none") else float(text)


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True, help="built-in name or INI scenario file")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--grid", type=parse_grid, help="WxH cell grid")
    p.add_argument("--executors", type=int)
    p.add_argument("--routers", type=int)
    p.add_argument("--round-period", type=float, help="seconds between load-balancing rounds")
    p.add_argument("--beta", type=int)
    p.add_argument("--window", type=_window, help="data retention in seconds, or 'inf'")
    p.add_argument("--duration", type=float, help="override the scenario duration (seconds)")
    p.add_argument("--snapshot-at", type=float, action="append", default=[], help="dump the plan at this time")


def _prepare(args):
    sc = load_scenario(args.scenario)
    if args.duration is not None:
        if args.duration <= 0:
            raise ValueError("--duration must be positive")
        sc.workload.duration = args.duration
    if args.grid is not None:
        sc.workload.grid = args.grid
    cfg = sc.sim_config(
        seed=args.seed,
        grid=tuple(sc.workload.grid),
        executors=args.executors,
        routers=args.routers,
        round_period=args.round_period,
        beta=args.beta,
        window=args.window,
        snapshot_times=tuple(args.snapshot_at) or None,
    )
    return sc, cfg


def _run_one(sc, cfg, strategy: str):
    return Simulation(cfg, sc.workload, StrategyConfig(kind=strategy)).run()


def cmd_run(args) -> int:
    sc, cfg = _prepare(args)
    report = _run_one(sc, cfg, args.strategy)
    paths = write_run_outputs(report, _out_dir(args.out))
    s = report.summary
    print(
        f"{sc.name} {args.strategy} seed={args.seed}: delivered={s['delivered']} "
        f"plan_changes={s['plan_changes']} violations={s['violations']}"
    )
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_compare(args) -> int:
    names = [n.strip() for n in args.strategies.split(",") if n.strip()]
    bad = [n for n in names if n not in STRATEGIES]
    if len(names) < 2 or bad:
        raise ValueError(f"--strategies needs two or more of {', '.join(STRATEGIES)}; bad: {bad or 'too few'}")
    sc, cfg = _prepare(args)
    out = _out_dir(args.out)
    reports = {}
    for n in names:
        reports[n] = _run_one(sc, cfg, n)
        write_run_outputs(reports[n], out, prefix=f"{n}_")
    rows = compare_rows(reports, baseline=names[-1])
    p = out / "compare.csv"
    p.write_text(rows_to_csv(rows))
    print(f"wrote {p}")
    return 0


def cmd_stats_bytes(args) -> int:
    cells = args.cells if args.cells is not None else args.grid[0] * args.grid[1]
    print("kind,executors,live_cells,bytes_per_round")
    print(f"decentralized,{args.executors},{cells},{stats_bytes('decentralized', args.executors, cells)}")
    print(f"centralized,{args.executors},{cells},{stats_bytes('centralized', args.executors, cells)}")
    return 0


def cmd_plan(args) -> int:
    if args.scenario:
        from .baselines import static_history_plan

        sc = load_scenario(args.scenario)
        cfg = sc.sim_config(seed=args.seed, executors=args.executors)
        plan = static_history_plan(sc.workload, cfg, StrategyConfig(kind="static_history"))
        sys.stdout.write(f"# static history plan: {plan.iterations} iterations, stop: {plan.stop_reason}\n")
        sys.stdout.write(plan.grid.to_snapshot())
        return 0
    grid = init_partitioning(args.executors or 1, args.grid or (64, 64))
    sys.stdout.write(grid.to_snapshot())
    return 0


def cmd_scenarios(args) -> int:
    if args.show:
        sys.stdout.write(scenario_to_text(load_scenario(args.show)))
        return 0
    for n in BUILTIN_SCENARIOS:
        print(n)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swarmlb", description="Adaptive spatial load-balancing simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one strategy on a scenario")
    _add_overrides(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="swarm")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="simulate several strategies on one scenario")
    _add_overrides(p)
    p.add_argument("--strategies", default="swarm,static_uniform", help="comma list; ratios use the last one")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stats-bytes", help="per-round statistics traffic, decentralized vs centralized")
    p.add_argument("--executors", type=int, required=True)
    p.add_argument("--cells", type=int)
    p.add_argument("--grid", type=parse_grid, default=(1000, 1000))
    p.set_defaults(func=cmd_stats_bytes)

    p = sub.add_parser("plan", help="print an initial or static-history plan snapshot")
    p.add_argument("--executors", type=int)
    p.add_argument("--grid", type=parse_grid)
    p.add_argument("--scenario", help="build the static-history plan for this scenario")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("scenarios", help="list built-in scenarios or print one as INI")
    p.add_argument("--show", metavar="NAME")
    p.set_defaults(func=cmd_scenarios)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, InvalidConfiguration, FileNotFoundError, KeyError) as exc:
        print(f"swarmlb: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
