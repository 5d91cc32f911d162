"""Command line entry point: ``hapsnet run`` for sweeps, ``hapsnet map`` for association maps."""

from __future__ import annotations

import argparse
import logging
import sys

from .association import associate
from .channel import build_channels
from .errors import ConfigError
from .experiments import EXECUTIONS, PIPELINES, SWEEP_VARIABLES, ExperimentPlan, base_config, emit_user_map, \
    read_results, run_plan
from .scenario import build_topology

EXIT_OK, EXIT_ROWS_FAILED, EXIT_INVALID = 0, 1, 2


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"0-4,7"`` -> ``(0, 1, 2, 3, 4, 7)``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else (part, "")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return tuple(seeds)


def parse_sweep(text: str | None):
    """``"haps_power=50,100,200"`` -> ``("haps_power", (50.0, 100.0, 200.0))``."""
    if not text:
        return None, ()
    name, _, values = text.partition("=")
    name = name.strip()
    if name not in SWEEP_VARIABLES or not values:
        raise ConfigError(f"sweep must look like NAME=v1,v2 with NAME in {SWEEP_VARIABLES}")
    cast = float if name == "haps_power" else int
    return name, tuple(cast(v) for v in values.split(","))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hapsnet", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("--scenario", default="desk", help="desk, full, or a YAML scenario file")
        sp.add_argument("--n-haps", type=int, default=1, help="HAPS count for the built-in layouts")
        sp.add_argument("--n-users", type=int, default=None, help="user count for the built-in layouts")

    run = sub.add_parser("run", help="run a seeded sweep and write results.csv")
    scenario_args(run)
    run.add_argument("--sweep", default=None, help="NAME=v1,v2,... with NAME in " + ", ".join(SWEEP_VARIABLES))
    run.add_argument("--seeds", default="0", help="e.g. 0-19 or 0,3,5")
    run.add_argument("--pipeline", choices=PIPELINES, default="both")
    run.add_argument("--execution", choices=EXECUTIONS, default="centralized")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--epsilon", type=float, default=None,
                     help="SCA tolerance (SINR units; bits/s/Hz for sum rate)")
    run.add_argument("--max-iters", type=int, default=100)
    run.add_argument("--max-rounds", type=int, default=50)
    run.add_argument("--min-sinr", type=float, default=None, help="per-user SINR floor for every user")
    run.add_argument("--rural-unconnected", action="store_true",
                     help="without HAPSs, leave rural users unserved with rate 0")
    run.add_argument("--antenna-caps", action="store_true", help="limit each transmitter to N_A users")
    run.add_argument("--no-traces", action="store_true")

    mp = sub.add_parser("map", help="write the user-to-transmitter association map of one seed")
    scenario_args(mp)
    mp.add_argument("--seed", type=int, default=0)
    mp.add_argument("--out", default="user_map.csv")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "map":
            plan = ExperimentPlan(scenario=args.scenario, n_haps=args.n_haps, n_users=args.n_users)
            config = base_config(plan)
            topology = build_topology(config, args.seed)
            association = associate(topology, build_channels(topology, config.fading, args.seed))
            emit_user_map(association, topology, args.out)
            return EXIT_OK
        sweep, values = parse_sweep(args.sweep)
        plan = ExperimentPlan(
            scenario=args.scenario, n_haps=args.n_haps, n_users=args.n_users, sweep=sweep, values=values,
            seeds=parse_seeds(args.seeds), pipeline=args.pipeline, execution=args.execution, out_dir=args.out,
            epsilon=args.epsilon, max_iters=args.max_iters, max_rounds=args.max_rounds, min_sinr=args.min_sinr,
            rural_unconnected=args.rural_unconnected, antenna_caps=args.antenna_caps, traces=not args.no_traces,
        )
    except (ConfigError, ValueError) as exc:
        print(f"hapsnet: invalid plan: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        path = run_plan(plan)
    except ConfigError as exc:
        print(f"hapsnet: invalid plan: {exc}", file=sys.stderr)
        return EXIT_INVALID
    rows = read_results(path)
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        print(f"hapsnet: row value={r['value'] or '-'} seed={r['seed']} failed: {r['error']}", file=sys.stderr)
    print(f"{len(rows) - len(failed)}/{len(rows)} rows ok -> {path}")
    return EXIT_ROWS_FAILED if failed else EXIT_OK
