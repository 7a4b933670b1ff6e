"""Flight-plan generation and rerouting.

Plan generation draws random source/destination airports and per-source
exponential departure times, then routes each aircraft with an XY search
(traverse the X dimension first, then Y) that backtracks around time
conflicts with already-planned aircraft.

Rerouting is invoked lazily by the engine, at the tick an aircraft finds its
next sub-track unavailable (stormy or occupied). It tries, in order:

1. a storm-avoiding detour that rejoins the remaining route at a later cell
   exactly on the original schedule (same total length), preferring the
   latest reachable rejoin point;
2. a detour to the earliest rejoinable cell regardless of schedule slip;
3. a route to the controller's target cell from any non-stormy neighbor,
   even an occupied one, waiting one extra tick before departing;
4. waiting one tick and retrying the original route.

The controller only replans inside its own jurisdiction: the rejoin target is
the last cell of the remaining route that lies inside the analysis scope, and
the untouched tail beyond it is kept verbatim (shifted if the rejoin is late).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .mesh import Cell, Topology, DIRECTIONS

Entry = tuple[int, Cell]  # (arrival tick, sub-track)


class PlanGenerationError(Exception):
    """Raised when the retry budget is exhausted before m plans are placed."""


@dataclass(frozen=True)
class FlightPlan:
    """One aircraft's schedule: ordered (tick, cell) entries plus fuel."""

    aircraft_id: int
    entries: tuple[Entry, ...]
    fuel: int

    def __post_init__(self) -> None:
        if self.fuel <= 0:
            raise ValueError(f"plan {self.aircraft_id}: fuel must be positive")
        if not self.entries:
            raise ValueError(f"plan {self.aircraft_id}: empty route")
        for (t0, c0), (t1, c1) in zip(self.entries, self.entries[1:]):
            if t1 <= t0:
                raise ValueError(f"plan {self.aircraft_id}: ticks not increasing")
            if abs(c0[0] - c1[0]) + abs(c0[1] - c1[1]) != 1:
                raise ValueError(f"plan {self.aircraft_id}: {c0}->{c1} not adjacent")

    @property
    def departure_tick(self) -> int:
        return self.entries[0][0]

    @property
    def destination(self) -> Cell:
        return self.entries[-1][1]

    def cell_at(self, tick: int, fd: int) -> Cell | None:
        """Cell occupied at `tick`, or None if not in transit then."""
        if tick < self.entries[0][0] or tick >= self.entries[-1][0] + fd:
            return None
        cell = self.entries[0][1]
        for t, c in self.entries:
            if t <= tick:
                cell = c
            else:
                break
        return cell


@dataclass(frozen=True)
class PlanBatch:
    """A seeded, pairwise conflict-free batch of initial flight plans."""

    plans: tuple[FlightPlan, ...]
    lambda_param: float
    seed: int
    n: int


def departure_time_from(plan: FlightPlan, cell: Cell, fd: int) -> int | None:
    """Tick at which the plan departs `cell`, or None if it never visits it."""
    for i, (t, c) in enumerate(plan.entries):
        if c == cell:
            if i + 1 < len(plan.entries):
                return plan.entries[i + 1][0]
            return t + fd
    return None


def has_time_conflict(
    cell: Cell, arrival_time: int, plans: list[FlightPlan] | tuple[FlightPlan, ...], fd: int = 1
) -> bool:
    """True if some plan arrives at `cell` at arrival_time or departs it at
    arrival_time+fd (the two clauses coincide for uniform fd)."""
    for plan in plans:
        for i, (t, c) in enumerate(plan.entries):
            if c != cell:
                continue
            if t == arrival_time:
                return True
            dep = plan.entries[i + 1][0] if i + 1 < len(plan.entries) else t + fd
            if dep == arrival_time + fd:
                return True
    return False


def generate_route(
    src: Cell,
    arrival_time: int,
    dst: Cell,
    plans: list[FlightPlan] | tuple[FlightPlan, ...],
    route: list[Cell] | None = None,
    *,
    fd: int = 1,
) -> list[Cell]:
    """XY route search with time-conflict backtracking.

    Traverses the X dimension first (x never decreases), switching to Y when
    the next X cell conflicts; when both directions fail the last cell is
    dropped and the caller's branch fails. Returns [] when no route exists,
    including when src itself conflicts.
    """
    if route is None:
        route = []
    xs, ys = src
    xd, yd = dst
    if has_time_conflict(src, arrival_time, plans, fd):
        return []
    route.append(src)
    if src == dst:
        return route
    increase_x = 1 if xs < xd else 0
    increase_y = 1 if ys < yd else (-1 if ys > yd else 0)
    if increase_x == 1:
        if generate_route((xs + 1, ys), arrival_time + fd, dst, plans, route, fd=fd):
            return route
        if increase_y != 0 and generate_route(
            (xs, ys + increase_y), arrival_time + fd, dst, plans, route, fd=fd
        ):
            return route
        route.pop()
        return []
    if increase_y != 0:
        if generate_route((xs, ys + increase_y), arrival_time + fd, dst, plans, route, fd=fd):
            return route
        route.pop()
        return []
    route.pop()
    return []


def generate_flight_plans(
    m: int,
    lambda_param: float,
    fd: int,
    topology: Topology,
    seed: int,
    fuel: int,
    max_attempts: int | None = None,
) -> PlanBatch:
    """Generate m conflict-free plans with per-source exponential departures.

    Departure gaps are drawn by inverse-CDF from one independent stream per
    source airport, rounded up to integer ticks and clamped to at least fd.
    Failed route attempts are retried with fresh draws until the budget
    (100*m attempts by default) runs out.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    if lambda_param <= 0:
        raise ValueError("lambda must be > 0")
    budget = max_attempts if max_attempts is not None else max(1, 100 * m)
    chooser = random.Random(f"{seed}:choose")
    streams = [random.Random(f"{seed}:src:{i}") for i in range(len(topology.sources))]
    last_dep = [0] * len(topology.sources)
    plans: list[FlightPlan] = []
    attempts = 0
    while len(plans) < m:
        attempts += 1
        if attempts > budget:
            raise PlanGenerationError(
                f"could not place {m} plans within {budget} attempts "
                f"({len(plans)} placed)"
            )
        si = chooser.randrange(len(topology.sources))
        di = chooser.randrange(len(topology.destinations))
        src = topology.sources[si]
        dst = topology.destinations[di]
        u = streams[si].random()
        gap = max(math.ceil(-math.log1p(-u) / lambda_param), fd)
        dep = last_dep[si] + gap
        last_dep[si] = dep
        route = generate_route(src, dep, dst, plans, [], fd=fd)
        if not route:
            continue
        entries = tuple((dep + k * fd, c) for k, c in enumerate(route))
        plans.append(FlightPlan(aircraft_id=len(plans), entries=entries, fuel=fuel))
    return PlanBatch(plans=tuple(plans), lambda_param=lambda_param, seed=seed, n=topology.n)


def validate_batch(batch: PlanBatch, topology: Topology, fd: int = 1) -> list[str]:
    """Pairwise conflict and per-source spacing violations, empty if valid."""
    problems = []
    for i, plan in enumerate(batch.plans):
        others = batch.plans[:i] + batch.plans[i + 1 :]
        for t, c in plan.entries:
            if has_time_conflict(c, t, others, fd):
                problems.append(f"plan {plan.aircraft_id}: conflict at {c} tick {t}")
    by_source: dict[Cell, list[int]] = {}
    for plan in batch.plans:
        by_source.setdefault(plan.entries[0][1], []).append(plan.departure_tick)
    for src, deps in by_source.items():
        deps.sort()
        for a, b in zip(deps, deps[1:]):
            if b - a < fd:
                problems.append(f"source {src}: departures {a},{b} closer than {fd}")
    return problems


# ---------------------------------------------------------------------------
# Rerouting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RerouteNetwork:
    """Snapshot the controller sees when replanning one aircraft."""

    topology: Topology
    occupied: frozenset[Cell]
    stormy: frozenset[Cell]
    scope_cells: frozenset[Cell] | None = None  # None means the whole grid

    def in_scope(self, cell: Cell) -> bool:
        return self.scope_cells is None or cell in self.scope_cells


@dataclass(frozen=True)
class RerouteResult:
    entries: tuple[Entry, ...]
    phase: int  # 1..4, matching the module docstring
    delayed: bool


def xy_route_avoiding(src: Cell, dst: Cell, avoid: frozenset[Cell], topology: Topology) -> list[Cell] | None:
    """Deterministic shortest XY path (x toward dst, then y), sidestepping
    `avoid` cells with the same switch-and-backtrack scheme as route search.

    Every step moves one cell closer to dst, so any result is a minimal
    (manhattan) path; returns None when the avoid set cuts all of them.
    """
    route: list[Cell] = []

    def go(cur: Cell) -> bool:
        if cur in avoid or not topology.in_grid(cur):
            return False
        route.append(cur)
        if cur == dst:
            return True
        dx = (dst[0] > cur[0]) - (dst[0] < cur[0])
        dy = (dst[1] > cur[1]) - (dst[1] < cur[1])
        if dx != 0:
            if go((cur[0] + dx, cur[1])):
                return True
            if dy != 0 and go((cur[0], cur[1] + dy)):
                return True
            route.pop()
            return False
        if dy != 0:
            if go((cur[0], cur[1] + dy)):
                return True
        route.pop()
        return False

    return route if go(src) else None


def _available_neighbors(
    current: Cell, blocked: Cell, network: RerouteNetwork, allow_occupied: bool
) -> list[Cell]:
    out = []
    for _, (dx, dy) in DIRECTIONS:
        nb = (current[0] + dx, current[1] + dy)
        if nb == blocked or not network.topology.in_grid(nb):
            continue
        if nb in network.stormy or not network.in_scope(nb):
            continue
        if not allow_occupied and nb in network.occupied:
            continue
        out.append(nb)
    return out


def reroute(
    current_cell: Cell,
    current_tick: int,
    remainder: tuple[Entry, ...],
    network: RerouteNetwork,
    fd: int = 1,
) -> RerouteResult:
    """Replan an aircraft whose next sub-track is unavailable.

    `remainder` is the not-yet-traveled suffix of its plan; remainder[0] is
    the blocked entry and remainder[0][0] == current_tick, the departure tick
    at which the blockage was found.
    """
    blocked = remainder[0][1]
    ticks = [t for t, _ in remainder]
    cells = [c for _, c in remainder]
    t0 = current_tick
    # the blocked sub-track is known-unavailable: detours route around it
    # (phase 4 covers waiting for it to clear)
    avoid = network.stormy | {blocked}

    prefix_end = -1
    for i, c in enumerate(cells):
        if not network.in_scope(c):
            break
        prefix_end = i
    rejoin_candidates = list(range(1, prefix_end + 1))

    free_neighbors = _available_neighbors(current_cell, blocked, network, allow_occupied=False)

    # Phase 1: rejoin on the original schedule, latest reachable point first.
    for i in reversed(rejoin_candidates):
        span = ticks[i] - t0
        if span % fd != 0:
            continue
        needed_len = span // fd + 1
        for start in free_neighbors:
            route = xy_route_avoiding(start, cells[i], avoid, network.topology)
            if route is not None and len(route) == needed_len:
                entries = tuple((t0 + k * fd, c) for k, c in enumerate(route))
                return RerouteResult(entries + remainder[i + 1 :], phase=1, delayed=False)

    # Phase 2: rejoin as early as possible, accepting schedule slip.
    for i in rejoin_candidates:
        for start in free_neighbors:
            route = xy_route_avoiding(start, cells[i], avoid, network.topology)
            if route is None:
                continue
            entries = tuple((t0 + k * fd, c) for k, c in enumerate(route))
            delta = entries[-1][0] - ticks[i]
            tail = tuple((t + delta, c) for t, c in remainder[i + 1 :])
            return RerouteResult(entries + tail, phase=2, delayed=False)

    # Phase 3: any non-stormy neighbor (even occupied), one tick of delay,
    # straight to the controller's target cell.
    if prefix_end >= 0:
        target = cells[prefix_end]
        for start in _available_neighbors(current_cell, blocked, network, allow_occupied=True):
            route = xy_route_avoiding(start, target, avoid, network.topology)
            if route is None:
                continue
            entries = tuple((t0 + 1 + k * fd, c) for k, c in enumerate(route))
            delta = entries[-1][0] - ticks[prefix_end]
            tail = tuple((t + delta, c) for t, c in remainder[prefix_end + 1 :])
            return RerouteResult(entries + tail, phase=3, delayed=True)

    # Phase 4: hold one tick and retry the original route.
    shifted = tuple((t + 1, c) for t, c in remainder)
    return RerouteResult(shifted, phase=4, delayed=True)
