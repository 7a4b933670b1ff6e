"""Replayable two-region fixture with eighteen numbered sub-tracks.

The map is the top three rows of a 6x6 mesh split into a west and an east
3x3 region; sub-tracks are numbered row-major, 1..6 on the top row through
13..18 on the third row, so the west region owns {1,2,3,7,8,9,13,14,15}. The
three bottom rows exist (the mesh is square) but carry no traffic.

Two aircraft fly it: an eastbound one entering at sub-track 7 at tick 0 and
scheduled through 8,9,10,11,12 to 6, and a westbound one entering at 17 at
tick 5 and scheduled through 11,5,4 to 3. A storm on sub-track 8 from tick 0
forces the eastbound reroute, whose late border crossing drags the east
region into scope; inside the composed scope the westbound aircraft is then
rerouted off the shared sub-track 11.
"""

from __future__ import annotations

from .mesh import Cell, Topology, build_mesh
from .planner import FlightPlan

FIXTURE_N = 6
FIXTURE_REGION = 3

EASTBOUND_ID = 0
WESTBOUND_ID = 1


def subtrack_cell(number: int) -> Cell:
    """Cell of sub-track `number` (1..18), numbered row-major on 3 rows."""
    if not 1 <= number <= 18:
        raise ValueError(f"sub-track number out of range: {number}")
    k = number - 1
    return (k % 6, k // 6)


def cell_subtrack(cell: Cell) -> int:
    x, y = cell
    if not (0 <= x < 6 and 0 <= y < 3):
        raise ValueError(f"cell {cell} is not a numbered sub-track")
    return y * 6 + x + 1


def numbered_plan(aircraft_id: int, pairs: list[tuple[int, int]], fuel: int) -> FlightPlan:
    entries = tuple((t, subtrack_cell(s)) for t, s in pairs)
    return FlightPlan(aircraft_id, entries, fuel)


def example_topology() -> Topology:
    return build_mesh(FIXTURE_N, FIXTURE_REGION)


def example_plans(fuel: int = 40) -> tuple[FlightPlan, FlightPlan]:
    eastbound = numbered_plan(
        EASTBOUND_ID, [(0, 7), (1, 8), (2, 9), (3, 10), (4, 11), (5, 12), (6, 6)], fuel
    )
    westbound = numbered_plan(
        WESTBOUND_ID, [(5, 17), (6, 11), (7, 5), (8, 4), (9, 3)], fuel
    )
    return eastbound, westbound


EXPECTED_EASTBOUND_REROUTE = [(0, 7), (1, 1), (2, 2), (3, 3), (4, 9), (5, 10), (6, 11), (7, 12), (8, 6)]
EXPECTED_WESTBOUND_REROUTE = [(5, 17), (6, 16), (7, 15), (8, 9), (9, 3)]

STORM_SUBTRACK = 8
STORM_TICK = 0

WEST_REGION = (0, 0)
EAST_REGION = (1, 0)


def plan_as_numbered(plan: FlightPlan) -> list[tuple[int, int]]:
    return [(t, cell_subtrack(c)) for t, c in plan.entries]
