"""Discrete-event execution of the runtime traffic model.

A model state holds the clock, the per-sub-track occupancy for the cells
inside the analysis scope, the contract lists of the boundary (environment)
actors, and a buffer of time-tagged events. Aircraft are messages: a send
event at a sub-track's departure tick hands the aircraft to the next cell in
its plan (a same-tick receive event), to a boundary actor (consuming a
contract entry), or to the destination airport (delivery).

Out-of-scope neighbors are abstracted to boundary actors, each holding an
ordered list of expected sends and receives derived from the initial flight
plans. A boundary actor that cannot perform an expected action is reported as
a deadlock diagnosis naming the neighbor region that owns it; that is the
signal the iterative analysis uses to widen its scope.

All state transitions are pure: `fire` maps (state, event) to a new state and
never mutates its input.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

from .mesh import Cell, ComponentId, Topology, scope_env_actor_cells
from .planner import Entry, FlightPlan, RerouteNetwork, RerouteResult, reroute

# Occupancy kinds. A cell is RESERVED between the send that targets it and
# the same-tick receive that completes the handoff, so a second sender cannot
# claim it in between.
OCCUPIED = 0
RESERVED = 1

# ERS entry kinds and event kinds (ints keep state keys compact and sortable).
ERS_SEND = 0
ERS_RECV = 1

EV_DEPART = 0
EV_MOVE = 1
EV_RECV = 2
EV_ENV_SEND = 3


class TransP(NamedTuple):
    """A moving object: identity, untraveled plan suffix, fuel, arrival tick.

    `remainder` always starts with the next cell to enter; `entered_tick` is
    the arrival tick at the current position. Fuel burns one unit per tick in
    transit and is charged at departure (so waiting shows up in the burn).
    """

    object_id: int
    remainder: tuple[Entry, ...]
    fuel_left: int
    entered_tick: int


class ERSEntry(NamedTuple):
    """One expected send or receive of a boundary actor, at an absolute tick."""

    tick: int
    kind: int  # ERS_SEND | ERS_RECV
    object_id: int
    src: Cell
    dst: Cell
    transp: TransP | None  # payload for sends, None for receives


class Event(NamedTuple):
    tick: int
    receiver: Cell
    kind: int
    transp: TransP | None

    def sort_key(self) -> tuple:
        oid = self.transp.object_id if self.transp is not None else -1
        return (self.tick, self.receiver[1], self.receiver[0], self.kind, oid)


@dataclass(frozen=True)
class EnvActorState:
    """Spec surface for one boundary actor: its cell and remaining contract."""

    cell: Cell
    ers: tuple[ERSEntry, ...]

    @property
    def next_action_tick(self) -> int | None:
        return self.ers[0].tick if self.ers else None

    def delays(self, base_tick: int) -> list[int]:
        out, last = [], base_tick
        for e in self.ers:
            out.append(e.tick - last)
            last = e.tick
        return out


@dataclass(frozen=True)
class AnalysisContext:
    """Immutable per-analysis configuration shared by all states."""

    topology: Topology
    scope: frozenset[ComponentId]
    scope_cells: frozenset[Cell]
    storm_cell: Cell | None
    storm_start: int
    storm_end: int | None  # None: persists forever
    fd: int = 1

    def stormy(self, cell: Cell, tick: int) -> bool:
        if self.storm_cell is None or cell != self.storm_cell:
            return False
        if tick < self.storm_start:
            return False
        return self.storm_end is None or tick < self.storm_end

    def in_scope(self, cell: Cell) -> bool:
        return cell in self.scope_cells

    def whole_grid(self) -> bool:
        return len(self.scope) == self.topology.regions_per_side ** 2


@dataclass(frozen=True)
class ModelState:
    """One explicit state: clock, occupancy, boundary contracts, events."""

    now: int
    actors: tuple[tuple[Cell, tuple[int, TransP]], ...]  # sorted by cell
    env: tuple[tuple[Cell, tuple[ERSEntry, ...]], ...]  # sorted by cell
    buffer: tuple[Event, ...]  # sorted by Event.sort_key
    delivered: frozenset[int]
    departed: frozenset[int]  # left the scope through a boundary actor

    def actor_map(self) -> dict[Cell, tuple[int, TransP]]:
        return dict(self.actors)

    def env_map(self) -> dict[Cell, tuple[ERSEntry, ...]]:
        return dict(self.env)

    def occupied_cells(self) -> frozenset[Cell]:
        return frozenset(cell for cell, _ in self.actors)

    def objects_in_scope(self) -> frozenset[int]:
        return frozenset(tp.object_id for _, (_, tp) in self.actors)


def _pack_actors(actors: dict[Cell, tuple[int, TransP]]) -> tuple:
    return tuple(sorted(actors.items()))


def _pack_env(env: dict[Cell, tuple[ERSEntry, ...]]) -> tuple:
    return tuple(sorted(env.items()))


def _pack_buffer(events: list[Event]) -> tuple[Event, ...]:
    return tuple(sorted(events, key=Event.sort_key))


def state_key(state: ModelState) -> tuple:
    """Canonical full encoding; equal states have equal keys by construction."""
    return (
        state.now,
        state.actors,
        state.env,
        state.buffer,
        tuple(sorted(state.delivered)),
        tuple(sorted(state.departed)),
    )


def normalized_key(ctx: AnalysisContext, state: ModelState) -> tuple:
    """State key with all time fields made relative to `now`.

    Two states with equal normalized keys (and no pending storm schedule
    change between them) evolve identically up to a time shift; a repeat
    along an exploration therefore certifies an eternal waiting loop.
    Arrival ticks are dropped: accrued waiting changes future fuel burn but
    not the control structure of the loop.
    """
    now = state.now
    actors = tuple(
        (cell, kind, tp.object_id, tuple((t - now, c) for t, c in tp.remainder), tp.fuel_left)
        for cell, (kind, tp) in state.actors
    )
    env = tuple(
        (cell, tuple((e.tick - now, e.kind, e.object_id, e.src, e.dst) for e in entries))
        for cell, entries in state.env
    )
    buffer = tuple(
        (e.tick - now, e.receiver, e.kind, e.transp.object_id if e.transp else -1)
        for e in state.buffer
    )
    storm = (
        ctx.storm_cell is not None and ctx.stormy(ctx.storm_cell, now),
        ctx.storm_start - now if ctx.storm_start > now else None,
        ctx.storm_end - now if ctx.storm_end is not None and ctx.storm_end > now else None,
    )
    return (actors, env, buffer, tuple(sorted(state.delivered)), tuple(sorted(state.departed)), storm)


# ---------------------------------------------------------------------------
# Diagnoses and fire outcomes
# ---------------------------------------------------------------------------

MISSED_SEND = "missed-send"
MISSED_RECEIVE = "missed-receive"
MISMATCH = "mismatch"
BLOCKAGE = "blockage"


@dataclass(frozen=True)
class Diagnosis:
    """Why a state is a deadlock state, and where the change propagates.

    `tick` is the observed tick (used as the propagation time when widening
    the scope); `expected_tick` is the contract tick that was violated.
    """

    kind: str
    cell: Cell
    component: ComponentId
    tick: int
    expected_tick: int | None
    object_id: int | None


class InitialPlacementConflict(Exception):
    """A contracted inbound send is blocked in the very first snapshot."""

    def __init__(self, diagnosis: Diagnosis):
        super().__init__(f"inbound send blocked at {diagnosis.cell}")
        self.diagnosis = diagnosis


@dataclass(frozen=True)
class Adaptation:
    """Record of one lazy replanning step along a trace."""

    object_id: int
    tick: int
    cell: Cell
    old_remainder: tuple[Entry, ...]
    new_remainder: tuple[Entry, ...]
    phase: int  # 1..4 per planner.reroute, 0 for a held departure


class FireOutcome(NamedTuple):
    status: str  # "ok" | "blocked" | "diag" | "disaster"
    state: ModelState | None
    diagnosis: Diagnosis | None
    disaster_id: int | None
    adaptation: Adaptation | None


def _ok(state: ModelState) -> FireOutcome:
    return FireOutcome("ok", state, None, None, None)


def _blocked() -> FireOutcome:
    return FireOutcome("blocked", None, None, None, None)


def _diag(d: Diagnosis) -> FireOutcome:
    return FireOutcome("diag", None, d, None, None)


# ---------------------------------------------------------------------------
# Initial state construction
# ---------------------------------------------------------------------------


def initial_state_from_plans(
    ctx: AnalysisContext, plans: list[FlightPlan] | tuple[FlightPlan, ...], t: int
) -> ModelState:
    """Snapshot the system at time t, keeping only in-scope positions.

    Aircraft whose plan straddles t are placed occupied with the correct
    remainder and a send event at their next tick; in-scope departures after
    t become departure events; aircraft already at their destination are in
    `delivered`. Out-of-scope traffic is represented only by the boundary
    contracts (see derive_ers).

    An aircraft arriving at a cell exactly at t yields to an aircraft already
    holding that cell: it is held one step back (at its previous cell, or at
    the airport) with its move still pending at t, so the blocked entry is
    replanned rather than rejected. Two aircraft settled on one cell is a
    corrupt plan set.
    """
    actors: dict[Cell, tuple[int, TransP]] = {}
    events: list[Event] = []
    delivered: set[int] = set()
    fd = ctx.fd
    arrivals: list[tuple[FlightPlan, int]] = []  # (plan, index of entry at tick t)
    for plan in plans:
        dep = plan.entries[0][0]
        exit_tick = plan.entries[-1][0] + fd
        if t >= exit_tick:
            delivered.add(plan.aircraft_id)
            continue
        if t < dep:
            first_cell = plan.entries[0][1]
            if ctx.in_scope(first_cell):
                tp = TransP(plan.aircraft_id, plan.entries, plan.fuel, dep)
                events.append(Event(dep, first_cell, EV_DEPART, tp))
            continue
        idx = 0
        for i, (tick, _) in enumerate(plan.entries):
            if tick <= t:
                idx = i
            else:
                break
        te, cell = plan.entries[idx]
        if te == t:
            if ctx.in_scope(cell):
                arrivals.append((plan, idx))
            continue
        if not ctx.in_scope(cell):
            continue
        if cell in actors:
            other = actors[cell][1].object_id
            raise ValueError(
                f"corrupt plan set: aircraft {other} and {plan.aircraft_id} "
                f"both at {cell} at time {t}"
            )
        _place(ctx, actors, events, plan, idx, te)

    # Arrivals at exactly t are settled in passes: an arrival whose target is
    # taken (by a settled aircraft or one still held on it) waits; holds can
    # cascade, so iterate to a fixpoint.
    pending = sorted(arrivals, key=lambda pi: pi[0].aircraft_id)
    placed_something = True
    while placed_something and pending:
        placed_something = False
        still = []
        held_cells = {
            p.entries[i - 1][1] for p, i in pending if i > 0
        }  # cells arrivals would fall back to
        for plan, idx in pending:
            cell = plan.entries[idx][1]
            if ctx.in_scope(cell) and cell not in actors and cell not in held_cells:
                _place(ctx, actors, events, plan, idx, t)
                placed_something = True
            else:
                still.append((plan, idx))
        pending = still
    for plan, idx in pending:
        if idx == 0:
            if ctx.in_scope(plan.entries[0][1]):
                tp = TransP(plan.aircraft_id, plan.entries, plan.fuel, t)
                events.append(Event(t, plan.entries[0][1], EV_DEPART, tp))
            continue
        prev_tick, prev_cell = plan.entries[idx - 1]
        if not ctx.in_scope(prev_cell):
            # inbound crossing at exactly t onto a cell we hold: the boundary
            # neighbor could not perform its contracted send
            raise InitialPlacementConflict(
                Diagnosis(
                    MISSED_SEND,
                    prev_cell,
                    ctx.topology.component_of(prev_cell),
                    t,
                    t,
                    plan.aircraft_id,
                )
            )
        assert prev_cell not in actors, "held-back cell already taken"
        dep = plan.entries[0][0]
        tp = TransP(
            plan.aircraft_id, plan.entries[idx:], plan.fuel - (prev_tick - dep), prev_tick
        )
        actors[prev_cell] = (OCCUPIED, tp)
        events.append(Event(t, prev_cell, EV_MOVE, None))
    return ModelState(
        now=t,
        actors=_pack_actors(actors),
        env=(),
        buffer=_pack_buffer(events),
        delivered=frozenset(delivered),
        departed=frozenset(),
    )


def _place(
    ctx: AnalysisContext,
    actors: dict,
    events: list[Event],
    plan: FlightPlan,
    idx: int,
    te: int,
) -> None:
    cell = plan.entries[idx][1]
    if not ctx.in_scope(cell):
        return
    dep = plan.entries[0][0]
    remainder = plan.entries[idx + 1 :]
    tp = TransP(plan.aircraft_id, remainder, plan.fuel - (te - dep), te)
    actors[cell] = (OCCUPIED, tp)
    move_tick = remainder[0][0] if remainder else te + ctx.fd
    events.append(Event(move_tick, cell, EV_MOVE, None))


def derive_ers(
    ctx: AnalysisContext, plans: list[FlightPlan] | tuple[FlightPlan, ...], t: int
) -> dict[Cell, EnvActorState]:
    """Boundary contracts: one expected entry per future border crossing.

    A plan entering the scope at t' > t contributes a send entry on the
    boundary actor it crosses from; a plan leaving the scope contributes a
    receive entry on the boundary actor it crosses into. Entries are ordered
    by action tick (sends before receives on ties).
    """
    env_cells = scope_env_actor_cells(ctx.scope, ctx.topology)
    per_cell: dict[Cell, list[ERSEntry]] = {cell: [] for cell in env_cells}
    for plan in plans:
        dep = plan.entries[0][0]
        for (tk, ck), (tn, cn) in zip(plan.entries, plan.entries[1:]):
            if tn <= t:
                continue
            if not ctx.in_scope(ck) and ctx.in_scope(cn):
                wire_remainder = plan.entries[plan.entries.index((tk, ck)) + 1 :]
                fuel_on_wire = plan.fuel - (tn - dep)
                tp = TransP(plan.aircraft_id, wire_remainder, fuel_on_wire, tn)
                per_cell[ck].append(ERSEntry(tn, ERS_SEND, plan.aircraft_id, ck, cn, tp))
            elif ctx.in_scope(ck) and not ctx.in_scope(cn):
                per_cell[cn].append(ERSEntry(tn, ERS_RECV, plan.aircraft_id, ck, cn, None))
    out = {}
    for cell, entries in per_cell.items():
        entries.sort(key=lambda e: (e.tick, e.kind, e.object_id))
        out[cell] = EnvActorState(cell=cell, ers=tuple(entries))
    return out


def compose_initial(
    ctx: AnalysisContext, plans: list[FlightPlan] | tuple[FlightPlan, ...], t: int
) -> ModelState:
    """Initial timed state: placements plus boundary contracts and events."""
    state = initial_state_from_plans(ctx, plans, t)
    ers_map = derive_ers(ctx, plans, t)
    env = {cell: st.ers for cell, st in ers_map.items()}
    events = list(state.buffer)
    for cell, entries in env.items():
        for e in entries:
            if e.kind == ERS_SEND:
                events.append(Event(e.tick, cell, EV_ENV_SEND, e.transp))
    return replace(state, env=_pack_env(env), buffer=_pack_buffer(events))


# ---------------------------------------------------------------------------
# Single-step semantics
# ---------------------------------------------------------------------------


def enabled_events(state: ModelState) -> list[Event]:
    """Events tagged with the current model time, in canonical order."""
    return [e for e in state.buffer if e.tick == state.now]


def _cell_open(ctx: AnalysisContext, state_actors: dict, cell: Cell, tick: int) -> bool:
    return cell not in state_actors and not ctx.stormy(cell, tick)


def _remove_event(state: ModelState, event: Event) -> list[Event]:
    events = list(state.buffer)
    events.remove(event)
    return events


def _earliest_broken_entry(entries: tuple[ERSEntry, ...], now: int) -> ERSEntry | None:
    for e in entries:
        if e.tick < now:
            return e
    return None


def fire(ctx: AnalysisContext, state: ModelState, event: Event) -> FireOutcome:
    """Consume one enabled event; pure function of (state, event)."""
    assert event.tick == state.now, "event not enabled"
    actors = state.actor_map()
    now = state.now

    if event.kind == EV_DEPART:
        target = event.receiver
        if not _cell_open(ctx, actors, target, now):
            return _blocked()
        tp = event.transp
        assert tp is not None and tp.remainder[0] == (now, target)
        rest = tp.remainder[1:]
        actors[target] = (OCCUPIED, TransP(tp.object_id, rest, tp.fuel_left, now))
        events = _remove_event(state, event)
        move_tick = rest[0][0] if rest else now + ctx.fd
        events.append(Event(move_tick, target, EV_MOVE, None))
        return _ok(
            replace(state, actors=_pack_actors(actors), buffer=_pack_buffer(events))
        )

    if event.kind == EV_RECV:
        cell = event.receiver
        kind, tp = actors[cell]
        assert kind == RESERVED and tp == event.transp, "receive without reservation"
        rest = tp.remainder[1:]
        if tp.fuel_left <= 0:
            return FireOutcome("disaster", None, None, tp.object_id, None)
        actors[cell] = (OCCUPIED, TransP(tp.object_id, rest, tp.fuel_left, now))
        events = _remove_event(state, event)
        move_tick = rest[0][0] if rest else now + ctx.fd
        events.append(Event(move_tick, cell, EV_MOVE, None))
        return _ok(
            replace(state, actors=_pack_actors(actors), buffer=_pack_buffer(events))
        )

    if event.kind == EV_MOVE:
        cell = event.receiver
        kind, tp = actors[cell]
        assert kind == OCCUPIED
        if not tp.remainder:
            # destination reached: hand over to the airport, always free
            del actors[cell]
            events = _remove_event(state, event)
            return _ok(
                replace(
                    state,
                    actors=_pack_actors(actors),
                    buffer=_pack_buffer(events),
                    delivered=state.delivered | {tp.object_id},
                )
            )
        t_next, c_next = tp.remainder[0]
        assert t_next == now, "move event fired off schedule"
        burn = now - tp.entered_tick
        wire = TransP(tp.object_id, tp.remainder, tp.fuel_left - burn, now)
        if ctx.in_scope(c_next):
            if not _cell_open(ctx, actors, c_next, now):
                return _blocked()
            del actors[cell]
            actors[c_next] = (RESERVED, wire)
            events = _remove_event(state, event)
            events.append(Event(now, c_next, EV_RECV, wire))
            return _ok(
                replace(state, actors=_pack_actors(actors), buffer=_pack_buffer(events))
            )
        return _fire_border_exit(ctx, state, event, actors, cell, c_next, wire)

    if event.kind == EV_ENV_SEND:
        return _fire_env_send(ctx, state, event, actors)

    raise AssertionError(f"unknown event kind {event.kind}")


def _fire_border_exit(
    ctx: AnalysisContext,
    state: ModelState,
    event: Event,
    actors: dict,
    cell: Cell,
    c_next: Cell,
    wire: TransP,
) -> FireOutcome:
    """In-scope object crossing to a boundary actor: match its contract."""
    now = state.now
    env = state.env_map()
    entries = env.get(c_next, ())
    comp = ctx.topology.component_of(c_next)
    broken = _earliest_broken_entry(entries, now)
    if broken is not None:
        return _diag(
            Diagnosis(MISSED_RECEIVE, c_next, comp, now, broken.tick, broken.object_id)
        )
    head = [e for e in entries if not (e.kind == ERS_SEND and e.tick == now)]
    match = None
    if head and head[0].kind == ERS_RECV and head[0].tick == now:
        e = head[0]
        if e.object_id == wire.object_id and e.src == cell and e.dst == c_next:
            match = e
    if match is None:
        expected = next(
            (e.tick for e in entries if e.kind == ERS_RECV and e.object_id == wire.object_id),
            None,
        )
        kind = MISSED_RECEIVE if expected is not None else MISMATCH
        return _diag(Diagnosis(kind, c_next, comp, now, expected, wire.object_id))
    remaining = tuple(e for e in entries if e is not match)
    env[c_next] = remaining
    del actors[cell]
    events = _remove_event(state, event)
    return _ok(
        replace(
            state,
            actors=_pack_actors(actors),
            env=_pack_env(env),
            buffer=_pack_buffer(events),
            departed=state.departed | {wire.object_id},
        )
    )


def _fire_env_send(
    ctx: AnalysisContext, state: ModelState, event: Event, actors: dict
) -> FireOutcome:
    now = state.now
    b = event.receiver
    tp = event.transp
    env = state.env_map()
    entries = env.get(b, ())
    comp = ctx.topology.component_of(b)
    broken = _earliest_broken_entry(entries, now)
    if broken is not None:
        return _diag(
            Diagnosis(MISSED_RECEIVE, b, comp, now, broken.tick, broken.object_id)
        )
    entry = next(
        (
            e
            for e in entries
            if e.kind == ERS_SEND and e.tick == now and e.object_id == tp.object_id
        ),
        None,
    )
    assert entry is not None, "env send event without its contract entry"
    target = entry.dst
    if tp.object_id in state.objects_in_scope():
        # the object should have left the scope before re-entering; the
        # upstream expectation must already be broken
        return _diag(Diagnosis(MISMATCH, b, comp, now, entry.tick, tp.object_id))
    if not _cell_open(ctx, actors, target, now):
        return _blocked()
    env[b] = tuple(e for e in entries if e is not entry)
    actors[target] = (RESERVED, tp)
    events = _remove_event(state, event)
    events.append(Event(now, target, EV_RECV, tp))
    return _ok(
        replace(
            state,
            actors=_pack_actors(actors),
            env=_pack_env(env),
            buffer=_pack_buffer(events),
        )
    )


def trigger(ctx: AnalysisContext, state: ModelState, event: Event) -> ModelState:
    """Spec surface: fire an enabled event, refusing unconsumable ones."""
    outcome = fire(ctx, state, event)
    if outcome.status == "ok":
        return outcome.state
    raise BlockedEventError(outcome)


class BlockedEventError(Exception):
    def __init__(self, outcome: FireOutcome):
        super().__init__(f"event not consumable: {outcome.status}")
        self.outcome = outcome


# ---------------------------------------------------------------------------
# Stuck-tick resolution (lazy adaptation) and time progression
# ---------------------------------------------------------------------------


def fireable_events(ctx: AnalysisContext, state: ModelState) -> list[Event]:
    """Enabled events whose fire() would not report 'blocked'."""
    actors = state.actor_map()
    out = []
    for e in enabled_events(state):
        if e.kind == EV_RECV:
            out.append(e)
        elif e.kind == EV_DEPART:
            if _cell_open(ctx, actors, e.receiver, state.now):
                out.append(e)
        elif e.kind == EV_MOVE:
            _, tp = actors[e.receiver]
            if not tp.remainder:
                out.append(e)
                continue
            c_next = tp.remainder[0][1]
            if not ctx.in_scope(c_next) or _cell_open(ctx, actors, c_next, state.now):
                out.append(e)
        elif e.kind == EV_ENV_SEND:
            env = state.env_map().get(e.receiver, ())
            entry = next(
                (
                    x
                    for x in env
                    if x.kind == ERS_SEND
                    and x.tick == state.now
                    and x.object_id == e.transp.object_id
                ),
                None,
            )
            if entry is None or _earliest_broken_entry(env, state.now) is not None:
                out.append(e)  # fires into a diagnosis
            elif e.transp.object_id in state.objects_in_scope():
                out.append(e)  # duplicate injection, also a diagnosis
            elif _cell_open(ctx, actors, entry.dst, state.now):
                out.append(e)
    return out


def resolve_stuck(ctx: AnalysisContext, state: ModelState) -> FireOutcome:
    """Handle a tick where enabled events exist but none can fire.

    In-scope blocked senders are replanned (one per call, canonical order);
    blocked departures hold at the airport for a tick; a boundary actor that
    cannot deliver its send is a deadlock diagnosis at its action tick.
    """
    actors = state.actor_map()
    now = state.now
    stuck = enabled_events(state)
    moves = [e for e in stuck if e.kind == EV_MOVE]
    departs = [e for e in stuck if e.kind == EV_DEPART]
    env_sends = [e for e in stuck if e.kind == EV_ENV_SEND]

    if moves:
        event = moves[0]
        cell = event.receiver
        _, tp = actors[cell]
        network = RerouteNetwork(
            topology=ctx.topology,
            occupied=state.occupied_cells(),
            stormy=frozenset({ctx.storm_cell}) if ctx.stormy(ctx.storm_cell, now) else frozenset(),
            scope_cells=None if ctx.whole_grid() else ctx.scope_cells,
        )
        result: RerouteResult = reroute(cell, now, tp.remainder, network, ctx.fd)
        new_tp = TransP(tp.object_id, result.entries, tp.fuel_left, tp.entered_tick)
        actors[cell] = (OCCUPIED, new_tp)
        events = _remove_event(state, event)
        events.append(Event(result.entries[0][0], cell, EV_MOVE, None))
        adaptation = Adaptation(
            tp.object_id, now, cell, tp.remainder, result.entries, result.phase
        )
        new_state = replace(state, actors=_pack_actors(actors), buffer=_pack_buffer(events))
        return FireOutcome("ok", new_state, None, None, adaptation)

    if departs:
        event = departs[0]
        tp = event.transp
        shifted = TransP(
            tp.object_id, tuple((t + 1, c) for t, c in tp.remainder), tp.fuel_left, tp.entered_tick + 1
        )
        events = _remove_event(state, event)
        events.append(Event(event.tick + 1, event.receiver, EV_DEPART, shifted))
        adaptation = Adaptation(
            tp.object_id, now, event.receiver, tp.remainder, shifted.remainder, 0
        )
        new_state = replace(state, buffer=_pack_buffer(events))
        return FireOutcome("ok", new_state, None, None, adaptation)

    event = env_sends[0]
    comp = ctx.topology.component_of(event.receiver)
    return _diag(
        Diagnosis(MISSED_SEND, event.receiver, comp, now, now, event.transp.object_id)
    )


def advance_time(ctx: AnalysisContext, state: ModelState) -> ModelState | None:
    """Progress the clock to the smallest pending time tag (None if final)."""
    assert not enabled_events(state), "time cannot progress past enabled events"
    if not state.buffer:
        return None
    new_now = min(e.tick for e in state.buffer)
    assert new_now > state.now, "time must strictly increase"
    return replace(state, now=new_now)


# ---------------------------------------------------------------------------
# Per-state classification
# ---------------------------------------------------------------------------


def pending_receive_diag(ctx: AnalysisContext, state: ModelState) -> Diagnosis | None:
    """Leftover boundary expectations once all activity has drained."""
    best: ERSEntry | None = None
    best_cell: Cell | None = None
    for cell, entries in state.env:
        for e in entries:
            if best is None or (e.tick, e.kind, e.object_id) < (best.tick, best.kind, best.object_id):
                best, best_cell = e, cell
    if best is None:
        return None
    kind = MISSED_RECEIVE if best.kind == ERS_RECV else MISSED_SEND
    return Diagnosis(
        kind, best_cell, ctx.topology.component_of(best_cell), best.tick, best.tick, best.object_id
    )


def is_deadlock(ctx: AnalysisContext, state: ModelState) -> Diagnosis | None:
    """Diagnosis if some pending action can never fire from this state.

    Final success states (quiet buffer, drained contracts) are not deadlocks.
    """
    if enabled_events(state):
        blocked = [e for e in enabled_events(state) if e not in fireable_events(ctx, state)]
        if blocked and not fireable_events(ctx, state):
            outcome = resolve_stuck(ctx, state)
            return outcome.diagnosis
        return None
    if not state.buffer:
        return pending_receive_diag(ctx, state)
    return None


def final_success(state: ModelState) -> bool:
    """All traffic delivered or departed, contracts drained, nothing pending."""
    if state.buffer or state.actors:
        return False
    return all(not entries for _, entries in state.env)


def low_fuel_object(state: ModelState) -> int | None:
    for _, (_, tp) in state.actors:
        if tp.fuel_left <= 0:
            return tp.object_id
    return None
