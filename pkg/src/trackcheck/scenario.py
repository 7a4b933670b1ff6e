"""Scenario files, the experiment harness, and CSV emission.

A scenario is a JSON document (schemaVersion 1) naming the mesh, the traffic
batch parameters (or an explicit plan list), the storm, the seed, the
analysis budget, and the mode. The harness runs scenarios and appends one
result row per (scenario, mode) run; rows are deterministic for a fixed seed
except for the wall-clock and memory columns.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .compositional import AnalysisReport, run_compositional, run_monolithic
from .mesh import Cell, cached_mesh
from .planner import FlightPlan, PlanBatch, generate_flight_plans

SCHEMA_VERSION = 1

MODES = ("compositional", "monolithic")

CSV_COLUMNS = [
    "scenarioId",
    "mode",
    "verdict",
    "iterations",
    "finalScopeSize",
    "totalStates",
    "timedStates",
    "wallMillis",
    "peakResidentBytes",
]

# Columns that legitimately vary between identical runs.
NONDETERMINISTIC_COLUMNS = {"wallMillis", "peakResidentBytes"}


class ScenarioError(Exception):
    """Scenario file rejected; the message lists every violated invariant."""


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str
    n: int
    region_size: int
    m: int
    lambda_param: float
    fd: int
    fuel: int
    storm_cell: Cell
    storm_tick: int
    storm_end_tick: int | None
    seed: int
    time_limit_ms: int | None
    mode: str
    plans: tuple[FlightPlan, ...] | None = None  # explicit fixture traffic

    def resolve_plans(self) -> tuple[FlightPlan, ...]:
        if self.plans is not None:
            return self.plans
        topo = cached_mesh(self.n, self.region_size)
        batch = generate_flight_plans(
            self.m, self.lambda_param, self.fd, topo, self.seed, self.fuel
        )
        return batch.plans


@dataclass(frozen=True)
class ResultRow:
    scenario_id: str
    mode: str
    verdict: str
    iterations: int
    final_scope_size: int
    total_states: int
    timed_states: int
    wall_millis: int
    peak_resident_bytes: int

    def as_list(self) -> list:
        return [
            self.scenario_id,
            self.mode,
            self.verdict,
            self.iterations,
            self.final_scope_size,
            self.total_states,
            self.timed_states,
            self.wall_millis,
            self.peak_resident_bytes,
        ]


def _plan_to_json(plan: FlightPlan) -> dict:
    return {
        "id": plan.aircraft_id,
        "fuel": plan.fuel,
        "entries": [[t, [c[0], c[1]]] for t, c in plan.entries],
    }


def _plan_from_json(obj: dict) -> FlightPlan:
    entries = tuple((int(t), (int(c[0]), int(c[1]))) for t, c in obj["entries"])
    return FlightPlan(int(obj["id"]), entries, int(obj["fuel"]))


def scenario_to_json(config: ScenarioConfig) -> dict:
    doc = {
        "schemaVersion": SCHEMA_VERSION,
        "scenarioId": config.scenario_id,
        "n": config.n,
        "regionSize": config.region_size,
        "m": config.m,
        "lambda": config.lambda_param,
        "fd": config.fd,
        "fuel": config.fuel,
        "stormCell": [config.storm_cell[0], config.storm_cell[1]],
        "stormTick": config.storm_tick,
        "stormEndTick": config.storm_end_tick,
        "seed": config.seed,
        "timeLimitMs": config.time_limit_ms,
        "mode": config.mode,
    }
    if config.plans is not None:
        doc["plans"] = [_plan_to_json(p) for p in config.plans]
    return doc


def scenario_from_json(doc: dict, source: str = "<scenario>") -> ScenarioConfig:
    problems: list[str] = []
    if doc.get("schemaVersion") != SCHEMA_VERSION:
        problems.append(f"schemaVersion must be {SCHEMA_VERSION}")
    n = int(doc.get("n", 0))
    region_size = int(doc.get("regionSize", 0))
    if n < 2:
        problems.append("n must be >= 2")
    if region_size < 1 or (n >= 2 and n % region_size != 0):
        problems.append("regionSize must divide n")
    m = int(doc.get("m", 0))
    if m < 0:
        problems.append("m must be >= 0")
    lam = float(doc.get("lambda", 0.0))
    if lam <= 0 and "plans" not in doc:
        problems.append("lambda must be > 0")
    fd = int(doc.get("fd", 1))
    if fd < 1:
        problems.append("fd must be >= 1")
    fuel = int(doc.get("fuel", n * n + 100))
    if fuel <= n * n:
        problems.append(
            f"fuel {fuel} must exceed the longest path length ({n * n})"
        )
    storm_raw = doc.get("stormCell")
    if storm_raw is None:
        storm_cell = (n // 2, n // 2)
    else:
        storm_cell = (int(storm_raw[0]), int(storm_raw[1]))
        if not (0 <= storm_cell[0] < n and 0 <= storm_cell[1] < n):
            problems.append(f"stormCell {storm_cell} outside the {n}x{n} grid")
    storm_tick = int(doc.get("stormTick", 0))
    if storm_tick < 0:
        problems.append("stormTick must be >= 0")
    storm_end = doc.get("stormEndTick")
    if storm_end is not None:
        storm_end = int(storm_end)
        if storm_end <= storm_tick:
            problems.append("stormEndTick must be greater than stormTick")
    mode = doc.get("mode", "compositional")
    if mode not in MODES:
        problems.append(f"mode must be one of {MODES}")
    plans = None
    if "plans" in doc:
        plans = tuple(_plan_from_json(p) for p in doc["plans"])
        for p in plans:
            for _, c in p.entries:
                if not (0 <= c[0] < n and 0 <= c[1] < n):
                    problems.append(f"plan {p.aircraft_id} leaves the grid at {c}")
                    break
    if problems:
        raise ScenarioError(f"{source}: " + "; ".join(problems))
    return ScenarioConfig(
        scenario_id=str(doc.get("scenarioId", Path(source).stem)),
        n=n,
        region_size=region_size,
        m=m,
        lambda_param=lam if lam > 0 else 1.0,
        fd=fd,
        fuel=fuel,
        storm_cell=storm_cell,
        storm_tick=storm_tick,
        storm_end_tick=storm_end,
        seed=int(doc.get("seed", 0)),
        time_limit_ms=doc.get("timeLimitMs"),
        mode=mode,
        plans=plans,
    )


def parse_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"{path}: unreadable scenario file: {exc}") from exc
    return scenario_from_json(doc, source=str(path))


def run_mode(config: ScenarioConfig, mode: str) -> AnalysisReport:
    topo = cached_mesh(config.n, config.region_size)
    plans = config.resolve_plans()
    runner = run_compositional if mode == "compositional" else run_monolithic
    return runner(
        topo,
        plans,
        config.storm_cell,
        config.storm_tick,
        storm_end=config.storm_end_tick,
        fd=config.fd,
        time_limit_ms=config.time_limit_ms,
    )


def report_row(config: ScenarioConfig, mode: str, report: AnalysisReport) -> ResultRow:
    peak = max((rec.stats.peak_resident_bytes for rec in report.per_iteration), default=0)
    return ResultRow(
        scenario_id=config.scenario_id,
        mode=mode,
        verdict=report.verdict.kind,
        iterations=report.iterations,
        final_scope_size=len(report.final_scope),
        total_states=report.total_states,
        timed_states=report.total_timed_states,
        wall_millis=report.total_wall_millis,
        peak_resident_bytes=peak,
    )


def run_experiment(config: ScenarioConfig, repetitions: int, modes: tuple[str, ...] | None = None) -> list[ResultRow]:
    """Run `repetitions` seeded replicas of the scenario in the given modes.

    Replica r uses seed+r; a per-run timeout becomes a row, never an abort.
    """
    rows: list[ResultRow] = []
    modes = modes or (config.mode,)
    for r in range(repetitions):
        cfg = ScenarioConfig(
            scenario_id=f"{config.scenario_id}#r{r}" if repetitions > 1 else config.scenario_id,
            n=config.n,
            region_size=config.region_size,
            m=config.m,
            lambda_param=config.lambda_param,
            fd=config.fd,
            fuel=config.fuel,
            storm_cell=config.storm_cell,
            storm_tick=config.storm_tick,
            storm_end_tick=config.storm_end_tick,
            seed=config.seed + r,
            time_limit_ms=config.time_limit_ms,
            mode=config.mode,
            plans=config.plans,
        )
        for mode in modes:
            rows.append(report_row(cfg, mode, run_mode(cfg, mode)))
    return rows


def emit_csv(rows: list[ResultRow], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.as_list())


def csv_without_timing(text: str) -> str:
    """CSV content with the nondeterministic columns blanked, for comparisons."""
    lines = text.strip().splitlines()
    reader = csv.reader(lines)
    header = next(reader)
    drop = [i for i, name in enumerate(header) if name in NONDETERMINISTIC_COLUMNS]
    out = [",".join(header)]
    for row in reader:
        for i in drop:
            row[i] = ""
        out.append(",".join(row))
    return "\n".join(out) + "\n"


def batch_to_json(batch: PlanBatch) -> dict:
    return {
        "schemaVersion": SCHEMA_VERSION,
        "n": batch.n,
        "lambda": batch.lambda_param,
        "seed": batch.seed,
        "plans": [_plan_to_json(p) for p in batch.plans],
    }


def batch_from_json(doc: dict) -> PlanBatch:
    return PlanBatch(
        plans=tuple(_plan_from_json(p) for p in doc["plans"]),
        lambda_param=float(doc["lambda"]),
        seed=int(doc["seed"]),
        n=int(doc["n"]),
    )
