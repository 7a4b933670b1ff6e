"""Command-line entry point.

Verbs:
  gen-plans        generate and save a seeded flight-plan batch
  verify           analyze one scenario in one mode
  bench            storm-time and aircraft-count sweeps, CSV output
  replay-example1  run the bundled two-region fixture and print the trace

Exit codes: 0 compatible, 2 deadlock, 3 timeout, 4 disaster, 1 usage or
scenario error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import sys
from pathlib import Path

from . import fixtures
from .compositional import off_schedule_components
from .mesh import cached_mesh
from .planner import generate_flight_plans
from .scenario import (
    MODES,
    ResultRow,
    ScenarioConfig,
    ScenarioError,
    batch_to_json,
    emit_csv,
    parse_scenario,
    report_row,
    run_mode,
    scenario_from_json,
)

VERDICT_EXIT = {"compatible": 0, "deadlock": 2, "timeout": 3, "disaster": 4}


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, help="mesh size")
    parser.add_argument("--region-size", type=int, help="region edge length")
    parser.add_argument("--m", type=int, help="aircraft count")
    parser.add_argument("--lambda", dest="lambda_param", type=float, help="departure rate")
    parser.add_argument("--fd", type=int, help="sub-track traversal time")
    parser.add_argument("--fuel", type=int, help="initial fuel units")
    parser.add_argument("--storm-cell", type=str, help="storm cell as x,y")
    parser.add_argument("--storm-tick", type=int, help="storm start tick")
    parser.add_argument("--storm-end-tick", type=int, help="storm end tick")
    parser.add_argument("--seed", type=int, help="batch seed")
    parser.add_argument("--time-limit-ms", type=int, help="analysis budget per run")
    parser.add_argument("--mode", choices=MODES, help="analysis mode")


def _scenario_from_args(args: argparse.Namespace) -> ScenarioConfig:
    if args.scenario:
        config = parse_scenario(args.scenario)
    else:
        if args.n is None or args.region_size is None:
            raise ScenarioError("either a scenario file or --n/--region-size is required")
        config = scenario_from_json(
            {
                "schemaVersion": 1,
                "scenarioId": "cli",
                "n": args.n,
                "regionSize": args.region_size,
                "m": args.m or 0,
                "lambda": args.lambda_param or 0.5,
                "seed": args.seed or 0,
            },
            source="cli",
        )
    overrides = {}
    if args.n is not None:
        overrides["n"] = args.n
    if args.region_size is not None:
        overrides["region_size"] = args.region_size
    if args.m is not None:
        overrides["m"] = args.m
    if args.lambda_param is not None:
        overrides["lambda_param"] = args.lambda_param
    if args.fd is not None:
        overrides["fd"] = args.fd
    if args.fuel is not None:
        overrides["fuel"] = args.fuel
    if args.storm_cell is not None:
        x, y = args.storm_cell.split(",")
        overrides["storm_cell"] = (int(x), int(y))
    if args.storm_tick is not None:
        overrides["storm_tick"] = args.storm_tick
    if args.storm_end_tick is not None:
        overrides["storm_end_tick"] = args.storm_end_tick
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.time_limit_ms is not None:
        overrides["time_limit_ms"] = args.time_limit_ms
    if args.mode is not None:
        overrides["mode"] = args.mode
    return dataclasses.replace(config, **overrides) if overrides else config


def cmd_gen_plans(args: argparse.Namespace) -> int:
    topo = cached_mesh(args.n, args.region_size)
    batch = generate_flight_plans(
        args.m, args.lambda_param, args.fd, topo, args.seed, args.fuel or args.n * args.n + 100
    )
    Path(args.out).write_text(json.dumps(batch_to_json(batch), indent=2) + "\n")
    print(f"wrote {len(batch.plans)} plans to {args.out}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    config = _scenario_from_args(args)
    mode = config.mode
    report = run_mode(config, mode)
    row = report_row(config, mode, report)
    print(
        f"{config.scenario_id}: {report.verdict.kind} "
        f"(mode={mode}, iterations={report.iterations}, "
        f"scope={len(report.final_scope)}, timedStates={row.timed_states}, "
        f"wallMillis={row.wall_millis})"
    )
    if report.verdict.diagnosis is not None:
        d = report.verdict.diagnosis
        print(
            f"  diagnosis: {d.kind} at cell {d.cell} (region {d.component}) "
            f"tick {d.tick} expected {d.expected_tick}"
        )
    if args.out:
        emit_csv([row], args.out)
    return VERDICT_EXIT[report.verdict.kind]


def _run_row(payload: tuple[dict, str]) -> ResultRow:
    doc, mode = payload
    config = scenario_from_json(doc, source=doc.get("scenarioId", "bench"))
    return report_row(config, mode, run_mode(config, mode))


def cmd_bench(args: argparse.Namespace) -> int:
    base = _scenario_from_args(args)
    modes = MODES if args.modes == "both" else (args.modes,)
    jobs: list[tuple[dict, str]] = []
    if args.m_sweep:
        start, step, stop = (int(x) for x in args.m_sweep.split(":"))
        for m in range(start, stop + 1, step):
            doc = _doc_with(base, scenario_id=f"{base.scenario_id}-m{m}", m=m)
            for mode in modes:
                jobs.append((doc, mode))
    storm_ticks = (
        [int(x) for x in args.storm_ticks.split(",")] if args.storm_ticks else []
    )
    for tick in storm_ticks:
        doc = _doc_with(base, scenario_id=f"{base.scenario_id}-t{tick}", storm_tick=tick)
        for mode in modes:
            jobs.append((doc, mode))
    if not jobs:
        for r in range(args.repetitions):
            doc = _doc_with(base, scenario_id=f"{base.scenario_id}#r{r}", seed=base.seed + r)
            for mode in modes:
                jobs.append((doc, mode))
    if args.parallel > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.parallel) as pool:
            rows = list(pool.map(_run_row, jobs))
    else:
        rows = [_run_row(job) for job in jobs]
    emit_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.m_sweep:
        for mode in modes:
            done = [int(r.scenario_id.rsplit("-m", 1)[1]) for r in rows
                    if r.mode == mode and r.verdict != "timeout"]
            print(f"  {mode}: max completed m = {max(done) if done else 0}")
    return 0


def _doc_with(base: ScenarioConfig, **changes) -> dict:
    from .scenario import scenario_to_json

    config = dataclasses.replace(base, **changes)
    return scenario_to_json(config)


def cmd_replay_example1(args: argparse.Namespace) -> int:
    from .compositional import run_compositional

    topo = fixtures.example_topology()
    plans = fixtures.example_plans()
    report = run_compositional(
        topo, plans, fixtures.subtrack_cell(fixtures.STORM_SUBTRACK), fixtures.STORM_TICK
    )
    print(f"verdict: {report.verdict.kind}, iterations: {report.iterations}")
    print(f"final scope: {sorted(report.final_scope)}")
    for i, rec in enumerate(report.per_iteration, 1):
        line = (
            f"  iteration {i}: scope={sorted(rec.scope)} from tick {rec.start_tick}: "
            f"{rec.verdict.kind}"
        )
        if rec.verdict.diagnosis:
            d = rec.verdict.diagnosis
            line += (
                f" ({d.kind} at sub-track {fixtures.cell_subtrack(d.cell)}, "
                f"tick {d.tick}, expected {d.expected_tick})"
            )
        print(line)
    for oid, label in ((fixtures.EASTBOUND_ID, "eastbound"), (fixtures.WESTBOUND_ID, "westbound")):
        print(f"  {label} plan: {fixtures.plan_as_numbered(report.adapted_plans[oid])}")
    initial = {p.aircraft_id: p for p in plans}
    for oid, comp, got, planned in off_schedule_components(topo, initial, report.adapted_plans):
        print(f"  aircraft {oid} enters region {comp} at tick {got} instead of {planned}")
    return VERDICT_EXIT[report.verdict.kind]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackcheck",
        description="Compositional verification of track-based traffic scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-plans", help="generate a seeded flight-plan batch")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--region-size", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--lambda", dest="lambda_param", type=float, default=0.5)
    p.add_argument("--fd", type=int, default=1)
    p.add_argument("--fuel", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_plans)

    p = sub.add_parser("verify", help="analyze one scenario in one mode")
    p.add_argument("scenario", nargs="?", help="scenario JSON file")
    _add_scenario_flags(p)
    p.add_argument("--out", help="also write a one-row CSV")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="experiment sweeps with CSV output")
    p.add_argument("scenario", nargs="?", help="base scenario JSON file")
    _add_scenario_flags(p)
    p.add_argument("--modes", choices=MODES + ("both",), default="both")
    p.add_argument("--storm-ticks", help="comma-separated storm start ticks")
    p.add_argument("--m-sweep", help="aircraft sweep as start:step:stop")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--parallel", type=int, default=1,
                   help="run independent scenarios in N worker processes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay-example1", help="replay the bundled two-region fixture")
    p.set_defaults(func=cmd_replay_example1)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
