"""Explicit state-space generation over the event semantics.

A breadth-first queue holds timed states (states whose only enabled step is
time progression). Dequeuing a timed state, the clock jumps to the smallest
pending time tag and a depth-first pass generates every timed state reachable
by firing the events of that tick.

Within a tick, events that cannot interact are fired as one canonical batch:
they pairwise commute, so every interleaving reaches the same timed states
and only the batched path is materialized. Exploration branches exactly where
order matters, i.e. when several senders claim the same free sub-track; each
claimant in turn wins and the losers are left to the lazy replanner. Blocked
senders whose target may still clear this tick simply wait their turn; a tick
that ends with blocked senders and nothing fireable invokes the replanner
(one aircraft at a time, canonical order). Reversing the canonical order
yields the same reachable timed-state set.

A timed state that repeats its predecessor's time-shifted signature can only
repeat forever (nothing pending distinguishes the two), so it is classified
as a traffic blockage deadlock.
"""

from __future__ import annotations

import resource
import time
from collections import deque
from dataclasses import dataclass

from .engine import (
    Adaptation,
    AnalysisContext,
    Diagnosis,
    Event,
    EV_DEPART,
    EV_ENV_SEND,
    EV_MOVE,
    BLOCKAGE,
    ModelState,
    advance_time,
    enabled_events,
    fire,
    fireable_events,
    final_success,
    normalized_key,
    pending_receive_diag,
    resolve_stuck,
    state_key,
)

COMPATIBLE = "compatible"
DEADLOCK = "deadlock"
DISASTER = "disaster"
TIMEOUT = "timeout"


@dataclass(frozen=True)
class Verdict:
    """Outcome of one state-space generation."""

    kind: str  # compatible | deadlock | disaster | timeout
    diagnosis: Diagnosis | None = None
    diagnoses: tuple[Diagnosis, ...] = ()
    aircraft_id: int | None = None
    success_trace_exists: bool = False

    @property
    def is_compatible(self) -> bool:
        return self.kind == COMPATIBLE


@dataclass
class ExplorationStats:
    total_states: int = 0
    timed_states: int = 0
    transitions: int = 0
    wall_millis: int = 0
    peak_resident_bytes: int = 0


@dataclass(frozen=True)
class ExplorationLimits:
    wall_ms: int | None = None
    max_states: int | None = None
    max_now: int | None = None
    deadline: float | None = None  # absolute time.monotonic() cutoff


@dataclass
class ExplorationResult:
    verdict: Verdict
    stats: ExplorationStats
    state_keys: set
    timed_keys: set
    states: dict
    parents: dict  # key -> (parent_key | None, ("fire"|"adapt"|"advance", payload))
    first_success_key: tuple | None
    diag_entries: list  # (Diagnosis, key of the state the diagnosis arose in)

    def adaptations_to(self, key: tuple) -> list[Adaptation]:
        """Replanning steps along the trace from the root to `key`."""
        out: list[Adaptation] = []
        cur = key
        while cur is not None:
            parent, edge = self.parents[cur]
            if edge is not None and edge[0] == "adapt":
                out.append(edge[1])
            cur = parent
        out.reverse()
        return out


class _Timeout(Exception):
    pass


class _Disaster(Exception):
    def __init__(self, aircraft_id: int):
        self.aircraft_id = aircraft_id


def _claim_target(ctx: AnalysisContext, state: ModelState, event: Event):
    """In-scope free cell this event would take, or None if non-claiming."""
    if event.kind == EV_DEPART:
        return event.receiver
    if event.kind == EV_ENV_SEND:
        env = state.env_map().get(event.receiver, ())
        for e in env:
            if e.kind == 0 and e.tick == state.now and e.object_id == event.transp.object_id:
                return e.dst
        return None
    if event.kind == EV_MOVE:
        _, tp = state.actor_map()[event.receiver]
        if tp.remainder:
            nxt = tp.remainder[0][1]
            if ctx.in_scope(nxt):
                return nxt
    return None


class StateSpaceExplorer:
    """Queue-driven generation per the two-level (breadth/depth) algorithm."""

    def __init__(
        self,
        ctx: AnalysisContext,
        limits: ExplorationLimits | None = None,
        reverse_order: bool = False,
    ):
        self.ctx = ctx
        self.limits = limits or ExplorationLimits()
        self.reverse = reverse_order
        self.states: dict = {}
        self.parents: dict = {}
        self.timed_keys: set = set()
        self._enqueued: set = set()
        self.stats = ExplorationStats()
        self.diag_entries: list = []
        self.first_success_key: tuple | None = None
        self._success_seen = False
        self._diag_tick: int | None = None
        self._t0 = time.monotonic()
        self._checked = 0

    # -- bookkeeping --------------------------------------------------------

    def _register(self, state: ModelState, parent: tuple | None, edge) -> tuple:
        key = state_key(state)
        if key not in self.states:
            self.states[key] = state
            self.parents[key] = (parent, edge)
        if edge is not None:
            self.stats.transitions += 1
        return key

    def _tick_budget(self) -> None:
        self._checked += 1
        if self._checked % 128:
            return
        if self.limits.deadline is not None and time.monotonic() > self.limits.deadline:
            raise _Timeout()
        if (
            self.limits.wall_ms is not None
            and (time.monotonic() - self._t0) * 1000 > self.limits.wall_ms
        ):
            raise _Timeout()
        if self.limits.max_states is not None and len(self.states) > self.limits.max_states:
            raise _Timeout()

    def _record_diag(self, diag: Diagnosis, at_key: tuple) -> None:
        self.diag_entries.append((diag, at_key))
        if self._diag_tick is None or diag.tick < self._diag_tick:
            self._diag_tick = diag.tick

    # -- inner depth-first pass ---------------------------------------------

    def _canonical(self, events: list[Event]) -> list[Event]:
        ordered = sorted(events, key=Event.sort_key)
        return list(reversed(ordered)) if self.reverse else ordered

    def _depth_fs(self, start: ModelState, start_key: tuple) -> list[tuple]:
        """All timed states reachable by firing out the current tick."""
        timed: list[tuple] = []
        visited: set = set()
        stack: list[tuple] = [start_key]
        while stack:
            self._tick_budget()
            key = stack.pop()
            if key in visited:
                continue
            visited.add(key)
            state = self.states[key]
            enabled = enabled_events(state)
            if not enabled:
                if key not in self.timed_keys:
                    self.timed_keys.add(key)
                timed.append(key)
                continue
            fireable = fireable_events(self.ctx, state)
            if not fireable:
                outcome = resolve_stuck(self.ctx, state)
                if outcome.status == "diag":
                    self._record_diag(outcome.diagnosis, key)
                    continue
                nkey = self._register(outcome.state, key, ("adapt", outcome.adaptation))
                stack.append(nkey)
                continue
            claims: dict = {}
            for e in fireable:
                target = _claim_target(self.ctx, state, e)
                if target is not None:
                    claims.setdefault(target, []).append(e)
            contended = {c: evs for c, evs in claims.items() if len(evs) > 1}
            contenders = {id(e) for evs in contended.values() for e in evs}
            batch = [e for e in fireable if id(e) not in contenders]
            if batch:
                cur, cur_key, dead = state, key, False
                for e in self._canonical(batch):
                    outcome = fire(self.ctx, cur, e)
                    if outcome.status == "diag":
                        self._record_diag(outcome.diagnosis, cur_key)
                        dead = True
                        break
                    if outcome.status == "disaster":
                        raise _Disaster(outcome.disaster_id)
                    assert outcome.status == "ok"
                    cur_key = self._register(outcome.state, cur_key, ("fire", e))
                    cur = outcome.state
                if not dead:
                    stack.append(cur_key)
                continue
            cell = min(contended)
            # LIFO stack: push losers first so the canonical winner pops first
            for e in reversed(self._canonical(contended[cell])):
                outcome = fire(self.ctx, state, e)
                if outcome.status == "diag":
                    self._record_diag(outcome.diagnosis, key)
                    continue
                if outcome.status == "disaster":
                    raise _Disaster(outcome.disaster_id)
                assert outcome.status == "ok"
                nkey = self._register(outcome.state, key, ("fire", e))
                stack.append(nkey)
        return timed

    # -- outer breadth-first loop -------------------------------------------

    def generate(self, s0: ModelState) -> ExplorationResult:
        root = self._register(s0, None, None)
        queue: deque = deque()
        try:
            if enabled_events(s0):
                # held-back arrivals leave work at the snapshot tick itself;
                # settle it before the queue-driven loop takes over
                for tkey in self._depth_fs(s0, root):
                    if tkey not in self._enqueued:
                        self._enqueued.add(tkey)
                        queue.append(tkey)
            else:
                self.timed_keys.add(root)
                self._enqueued.add(root)
                queue.append(root)
            while queue:
                self._tick_budget()
                key = queue.popleft()
                state = self.states[key]
                if self._diag_tick is not None and state.now > self._diag_tick:
                    continue
                advanced = advance_time(self.ctx, state)
                if advanced is None:
                    leftover = pending_receive_diag(self.ctx, state)
                    if leftover is not None:
                        self._record_diag(leftover, key)
                    else:
                        assert final_success(state)
                        self._success_seen = True
                        if self.first_success_key is None:
                            self.first_success_key = key
                    continue
                akey = self._register(advanced, key, ("advance", None))
                base_norm = normalized_key(self.ctx, state)
                for tkey in self._depth_fs(advanced, akey):
                    tstate = self.states[tkey]
                    repeat = normalized_key(self.ctx, tstate) == base_norm
                    over_horizon = (
                        self.limits.max_now is not None and tstate.now > self.limits.max_now
                    )
                    if repeat or over_horizon:
                        self._record_diag(self._blockage_diag(tstate), tkey)
                        continue
                    if tkey not in self._enqueued:
                        self._enqueued.add(tkey)
                        queue.append(tkey)
        except _Timeout:
            return self._finish(Verdict(TIMEOUT, success_trace_exists=self._success_seen))
        except _Disaster as d:
            return self._finish(
                Verdict(DISASTER, aircraft_id=d.aircraft_id, success_trace_exists=self._success_seen)
            )
        if self.diag_entries:
            min_tick = min(d.tick for d, _ in self.diag_entries)
            batch = tuple(d for d, _ in self.diag_entries if d.tick == min_tick)
            return self._finish(
                Verdict(
                    DEADLOCK,
                    diagnosis=batch[0],
                    diagnoses=batch,
                    success_trace_exists=self._success_seen,
                )
            )
        assert self._success_seen, "frontier drained without a classified state"
        return self._finish(Verdict(COMPATIBLE, success_trace_exists=True))

    def _blockage_diag(self, state: ModelState) -> Diagnosis:
        stuck_actors = []
        amap = state.actor_map()
        for cell, (_, tp) in state.actors:
            if not tp.remainder:
                continue
            nxt = tp.remainder[0][1]
            if nxt in amap or self.ctx.stormy(nxt, state.now) or not self.ctx.in_scope(nxt):
                stuck_actors.append((cell, tp))
        if not stuck_actors:
            stuck_actors = [(cell, tp) for cell, (_, tp) in state.actors]
        cell, tp = stuck_actors[0] if stuck_actors else ((0, 0), None)
        component = self.ctx.topology.component_of(cell)
        object_id = None
        if tp is not None:
            object_id = tp.object_id
            for _, c in tp.remainder:
                if not self.ctx.in_scope(c):
                    component = self.ctx.topology.component_of(c)
                    break
        return Diagnosis(BLOCKAGE, cell, component, state.now, None, object_id)

    def _finish(self, verdict: Verdict) -> ExplorationResult:
        self.stats.total_states = len(self.states)
        self.stats.timed_states = len(self.timed_keys)
        self.stats.wall_millis = int((time.monotonic() - self._t0) * 1000)
        self.stats.peak_resident_bytes = (
            resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
        )
        return ExplorationResult(
            verdict=verdict,
            stats=self.stats,
            state_keys=set(self.states.keys()),
            timed_keys=set(self.timed_keys),
            states=self.states,
            parents=self.parents,
            first_success_key=self.first_success_key,
            diag_entries=self.diag_entries,
        )


def generate_state_space(
    ctx: AnalysisContext,
    s0: ModelState,
    limits: ExplorationLimits | None = None,
    reverse_order: bool = False,
) -> ExplorationResult:
    return StateSpaceExplorer(ctx, limits, reverse_order).generate(s0)


def depth_fs(ctx: AnalysisContext, state: ModelState) -> set:
    """Spec surface: the set of timed states reachable within the tick."""
    explorer = StateSpaceExplorer(ctx)
    key = explorer._register(state, None, None)
    return {explorer.states[k] for k in explorer._depth_fs(state, key)}


def terminate(ctx: AnalysisContext, state: ModelState, limits: ExplorationLimits | None = None,
              elapsed_ms: int | None = None) -> str | None:
    """Stop-reason classification of one state (success/disaster/timeout)."""
    if limits and limits.wall_ms is not None and elapsed_ms is not None:
        if elapsed_ms > limits.wall_ms:
            return "timeout"
    for _, (_, tp) in state.actors:
        if tp.fuel_left <= 0 and tp.remainder:
            return "disaster"
    if final_success(state):
        return "success"
    return None
