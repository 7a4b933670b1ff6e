"""Iterative compositional analysis and the monolithic baseline.

The compositional run starts from the region hit by the storm at the storm
tick. Each iteration snapshots the system, abstracts every out-of-scope
neighbor into boundary actors carrying the initial-plan crossing contract,
and generates the state space with lazy in-scope replanning. A deadlock
diagnosis names a boundary actor whose region is then absorbed into the
scope; plans adapted so far are kept, the absorbed region's traffic re-enters
with its initial plans, and the analysis restarts at the propagation tick.
The loop stops when an iteration is compatible, or when the scope can no
longer grow.

The monolithic baseline runs the same engine and the same replanning policy
once, with every region in scope and no boundary abstraction. Both runs
agree on the verdict class whenever neither hits its budget; the compositional
run explores no more timed states than the monolithic one.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

from .engine import (
    AnalysisContext,
    EnvActorState,
    ERS_SEND,
    EV_DEPART,
    EV_ENV_SEND,
    Event,
    InitialPlacementConflict,
    ModelState,
    compose_initial,
    derive_ers,
    initial_state_from_plans,
    _pack_buffer,
    _pack_env,
)
from .mesh import Cell, ComponentId, Topology, env_components
from .planner import FlightPlan
from .statespace import (
    DEADLOCK,
    ExplorationLimits,
    ExplorationResult,
    ExplorationStats,
    Verdict,
    generate_state_space,
)


@dataclass(frozen=True)
class IterationRecord:
    scope: frozenset[ComponentId]
    start_tick: int
    verdict: Verdict
    stats: ExplorationStats


@dataclass
class AnalysisReport:
    """Outcome of a full compositional or monolithic run."""

    mode: str
    verdict: Verdict
    iterations: int
    final_scope: frozenset[ComponentId]
    per_iteration: list[IterationRecord] = field(default_factory=list)
    adapted_plans: dict[int, FlightPlan] = field(default_factory=dict)

    @property
    def total_timed_states(self) -> int:
        return sum(rec.stats.timed_states for rec in self.per_iteration)

    @property
    def total_states(self) -> int:
        return sum(rec.stats.total_states for rec in self.per_iteration)

    @property
    def total_wall_millis(self) -> int:
        return sum(rec.stats.wall_millis for rec in self.per_iteration)


def compose_components(
    scope: frozenset[ComponentId] | set[ComponentId],
    new_comp: ComponentId,
    topology: Topology,
) -> frozenset[ComponentId]:
    """Absorb a neighbor region; border channels become internal.

    A no-op when the region is already in scope or the scope covers the grid.
    """
    scope = frozenset(scope)
    if new_comp in scope:
        return scope
    if len(scope) == topology.regions_per_side ** 2:
        return scope
    if not any(new_comp in env_components(c, topology) for c in scope):
        raise ValueError(f"{new_comp} is not an environment component of the scope")
    return scope | {new_comp}


def _make_context(
    topology: Topology,
    scope: frozenset[ComponentId],
    storm_cell: Cell | None,
    storm_tick: int,
    storm_end: int | None,
    fd: int,
) -> AnalysisContext:
    return AnalysisContext(
        topology=topology,
        scope=scope,
        scope_cells=topology.scope_cells(scope),
        storm_cell=storm_cell,
        storm_start=storm_tick,
        storm_end=storm_end,
        fd=fd,
    )


def _horizon(plans: dict[int, FlightPlan], topology: Topology) -> int:
    if not plans:
        return topology.n * topology.n
    last = max(p.entries[-1][0] for p in plans.values())
    fuel = max(p.fuel for p in plans.values())
    return last + fuel + topology.n * topology.n


def _apply_adaptations(plans: dict[int, FlightPlan], adaptations) -> dict[int, FlightPlan]:
    out = dict(plans)
    for ad in adaptations:
        plan = out[ad.object_id]
        k = len(ad.old_remainder)
        assert k <= len(plan.entries) and plan.entries[-k:] == ad.old_remainder, (
            f"adaptation for {ad.object_id} does not match its plan suffix"
        )
        entries = plan.entries[:-k] + ad.new_remainder
        out[ad.object_id] = FlightPlan(plan.aircraft_id, entries, plan.fuel)
    return out


def _limits_for(deadline: float | None, horizon: int) -> ExplorationLimits:
    return ExplorationLimits(deadline=deadline, max_now=horizon)


def run_monolithic(
    topology: Topology,
    plans: list[FlightPlan] | tuple[FlightPlan, ...],
    storm_cell: Cell | None,
    storm_tick: int,
    storm_end: int | None = None,
    fd: int = 1,
    time_limit_ms: int | None = None,
) -> AnalysisReport:
    """Single whole-grid run with the identical replanning policy."""
    deadline = time.monotonic() + time_limit_ms / 1000 if time_limit_ms else None
    scope = frozenset(topology.all_components())
    ctx = _make_context(topology, scope, storm_cell, storm_tick, storm_end, fd)
    plan_map = {p.aircraft_id: p for p in plans}
    s0 = compose_initial(ctx, list(plan_map.values()), storm_tick)
    result = generate_state_space(ctx, s0, _limits_for(deadline, _horizon(plan_map, topology)))
    record = IterationRecord(scope, storm_tick, result.verdict, result.stats)
    adapted = _final_plans(plan_map, result)
    return AnalysisReport(
        mode="monolithic",
        verdict=result.verdict,
        iterations=1,
        final_scope=scope,
        per_iteration=[record],
        adapted_plans=adapted,
    )


def _final_plans(plan_map: dict[int, FlightPlan], result: ExplorationResult) -> dict[int, FlightPlan]:
    """Plans along the canonical decisive trace (success if one exists)."""
    key = result.first_success_key
    if key is None and result.diag_entries:
        min_tick = min(d.tick for d, _ in result.diag_entries)
        key = next(k for d, k in result.diag_entries if d.tick == min_tick)
    if key is None:
        return dict(plan_map)
    return _apply_adaptations(plan_map, result.adaptations_to(key))


def run_compositional(
    topology: Topology,
    plans: list[FlightPlan] | tuple[FlightPlan, ...],
    storm_cell: Cell,
    storm_tick: int,
    storm_end: int | None = None,
    fd: int = 1,
    time_limit_ms: int | None = None,
) -> AnalysisReport:
    """Zoom in on the stormy region; widen the scope while the change spreads."""
    deadline = time.monotonic() + time_limit_ms / 1000 if time_limit_ms else None
    initial_plan_map = {p.aircraft_id: p for p in plans}
    current_plans = dict(initial_plan_map)
    scope = frozenset({topology.component_of(storm_cell)})
    t = storm_tick
    records: list[IterationRecord] = []
    all_components = set(topology.all_components())
    horizon = _horizon(initial_plan_map, topology)

    while True:
        ctx = _make_context(topology, scope, storm_cell, storm_tick, storm_end, fd)
        try:
            s0 = _compose_iteration_state(ctx, current_plans, initial_plan_map, t)
        except InitialPlacementConflict as conflict:
            verdict = Verdict(DEADLOCK, diagnosis=conflict.diagnosis,
                              diagnoses=(conflict.diagnosis,))
            records.append(IterationRecord(scope, t, verdict, ExplorationStats()))
            grown = _grow_scope(scope, verdict, topology, all_components)
            if grown is None:
                return _deadlock_report(verdict, scope, records, current_plans)
            scope = grown
            t = max(t, conflict.diagnosis.tick)
            continue
        result = generate_state_space(ctx, s0, _limits_for(deadline, horizon))
        records.append(IterationRecord(scope, t, result.verdict, result.stats))
        if result.verdict.kind == DEADLOCK:
            grown = _grow_scope(scope, result.verdict, topology, all_components)
            if grown is None:
                return _deadlock_report(result.verdict, scope, records,
                                        _final_plans(current_plans, result))
            current_plans = _final_plans(current_plans, result)
            scope = grown
            t = max(t, result.verdict.diagnosis.tick)
            continue
        adapted = _final_plans(current_plans, result)
        return AnalysisReport(
            mode="compositional",
            verdict=result.verdict,
            iterations=len(records),
            final_scope=scope,
            per_iteration=records,
            adapted_plans=adapted,
        )


def _grow_scope(scope, verdict, topology, all_components):
    """Components to absorb from the same-tick diagnosis batch, or None."""
    new_comps = {
        d.component
        for d in verdict.diagnoses
        if d.component not in scope and d.component in all_components
    }
    if not new_comps or set(scope) == all_components:
        return None
    return frozenset(scope | new_comps)


def _deadlock_report(verdict, scope, records, plans):
    return AnalysisReport(
        mode="compositional",
        verdict=verdict,
        iterations=len(records),
        final_scope=frozenset(scope),
        per_iteration=records,
        adapted_plans=plans,
    )


def _compose_iteration_state(
    ctx: AnalysisContext,
    current_plans: dict[int, FlightPlan],
    initial_plans: dict[int, FlightPlan],
    t: int,
) -> ModelState:
    """Snapshot from current (possibly adapted) plans, contracts from initial
    plans: the boundary expectations are what the unchanged world assumes."""
    state = initial_state_from_plans(ctx, list(current_plans.values()), t)
    ers_map = derive_ers(ctx, list(initial_plans.values()), t)
    env = {cell: st.ers for cell, st in ers_map.items()}
    events = list(state.buffer)
    placed = state.objects_in_scope()
    departure_payloads = {
        e.transp.object_id for e in events if e.kind == EV_DEPART and e.transp is not None
    }
    for cell, entries in env.items():
        for e in entries:
            if e.kind == ERS_SEND:
                if e.object_id in placed or e.object_id in departure_payloads:
                    # adapted traffic already inside the scope keeps playing
                    # from its adapted plan; the stale inbound contract would
                    # double-inject it
                    env[cell] = tuple(x for x in env[cell] if x is not e)
                    continue
                events.append(Event(e.tick, cell, EV_ENV_SEND, e.transp))
    return replace(state, env=_pack_env(env), buffer=_pack_buffer(events))


def check_compatibility(
    ctx: AnalysisContext,
    state0: ModelState,
    env_interfaces: dict[Cell, EnvActorState],
    limits: ExplorationLimits | None = None,
) -> tuple[Verdict, ExplorationStats]:
    """Explore the product of the scope with explicit boundary interfaces."""
    env = {cell: st.ers for cell, st in env_interfaces.items()}
    events = list(state0.buffer)
    for cell, entries in env.items():
        for e in entries:
            if e.kind == ERS_SEND:
                events.append(Event(e.tick, cell, EV_ENV_SEND, e.transp))
    s0 = replace(state0, env=_pack_env(env), buffer=_pack_buffer(events))
    result = generate_state_space(ctx, s0, limits)
    return result.verdict, result.stats


def first_component_entries(topology: Topology, plan: FlightPlan) -> dict[ComponentId, int]:
    """First arrival tick of the plan in each region it touches."""
    out: dict[ComponentId, int] = {}
    for t, c in plan.entries:
        comp = topology.component_of(c)
        out.setdefault(comp, t)
    return out


def off_schedule_components(
    topology: Topology,
    initial: dict[int, FlightPlan],
    adapted: dict[int, FlightPlan],
) -> list[tuple[int, ComponentId, int, int | None]]:
    """Regions an adapted plan enters at a different tick than planned.

    Returns (aircraft, region, adapted entry tick, initial entry tick) rows;
    the initial tick is None for regions the initial plan never touched.
    """
    rows = []
    for oid, plan in sorted(adapted.items()):
        base = first_component_entries(topology, initial[oid])
        got = first_component_entries(topology, plan)
        for comp, tick in sorted(got.items()):
            if base.get(comp) != tick:
                rows.append((oid, comp, tick, base.get(comp)))
    return rows
