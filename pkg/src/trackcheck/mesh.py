"""Mesh topology: cells, regions, channels, and neighborhood queries.

The traveling space is an n-by-n grid of sub-tracks. Each sub-track is a
critical section holding at most one moving object. The grid is partitioned
into equal square regions (control areas); traffic enters from virtual source
airports on the west/north boundary and leaves through destination airports
on the east/south boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

Cell = tuple[int, int]  # (x, y), 0-based grid coordinates
ComponentId = tuple[int, int]  # (rx, ry) region coordinates
Channel = tuple[Cell, Cell]  # (source cell, sink cell), 4-adjacent

# Fixed direction order used everywhere a neighbor scan happens. The order is
# observable (rerouting output depends on it), so it must never change.
DIRECTIONS: tuple[tuple[str, tuple[int, int]], ...] = (
    ("N", (0, -1)),
    ("E", (1, 0)),
    ("S", (0, 1)),
    ("W", (-1, 0)),
)


@dataclass(frozen=True)
class Topology:
    """Immutable n-by-n mesh divided into square regions of edge region_size."""

    n: int
    region_size: int
    sources: tuple[Cell, ...]
    destinations: tuple[Cell, ...]

    def in_grid(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.n and 0 <= y < self.n

    def neighbors4(self, cell: Cell) -> list[Cell]:
        """In-grid 4-neighbors of cell, in fixed N, E, S, W order."""
        x, y = cell
        out = []
        for _, (dx, dy) in DIRECTIONS:
            nxt = (x + dx, y + dy)
            if self.in_grid(nxt):
                out.append(nxt)
        return out

    def component_of(self, cell: Cell) -> ComponentId:
        x, y = cell
        return (x // self.region_size, y // self.region_size)

    @property
    def regions_per_side(self) -> int:
        return self.n // self.region_size

    def all_components(self) -> list[ComponentId]:
        k = self.regions_per_side
        return [(rx, ry) for ry in range(k) for rx in range(k)]

    def component_cells(self, comp: ComponentId) -> list[Cell]:
        rx, ry = comp
        rs = self.region_size
        return [
            (x, y)
            for y in range(ry * rs, (ry + 1) * rs)
            for x in range(rx * rs, (rx + 1) * rs)
        ]

    def scope_cells(self, scope: frozenset[ComponentId]) -> frozenset[Cell]:
        cells: set[Cell] = set()
        for comp in scope:
            cells.update(self.component_cells(comp))
        return frozenset(cells)

    def middlemost_cell(self) -> Cell:
        return (self.n // 2, self.n // 2)


def build_mesh(n: int, region_size: int) -> Topology:
    """Build the n-by-n mesh with 2*(n-1) source and destination airports.

    Sources sit on the west and north boundaries, destinations on the east
    and south boundaries; the two corner cells shared between boundaries are
    assigned to exactly one list each so the counts come out to 2*(n-1).
    """
    if n < 2:
        raise ValueError(f"mesh size must be >= 2, got {n}")
    if region_size < 1 or n % region_size != 0:
        raise ValueError(f"region size {region_size} does not divide mesh size {n}")
    sources = tuple((0, y) for y in range(n - 1)) + tuple((x, 0) for x in range(1, n))
    destinations = tuple((n - 1, y) for y in range(1, n)) + tuple(
        (x, n - 1) for x in range(n - 1)
    )
    return Topology(n=n, region_size=region_size, sources=sources, destinations=destinations)


def component_of(cell: Cell, topology: Topology) -> ComponentId:
    if not topology.in_grid(cell):
        raise ValueError(f"cell {cell} outside {topology.n}x{topology.n} grid")
    return topology.component_of(cell)


def env_components(comp: ComponentId, topology: Topology) -> set[ComponentId]:
    """Regions owning a cell 4-adjacent to `comp` across the region border."""
    k = topology.regions_per_side
    rx, ry = comp
    out = set()
    for _, (dx, dy) in DIRECTIONS:
        nb = (rx + dx, ry + dy)
        if 0 <= nb[0] < k and 0 <= nb[1] < k:
            out.add(nb)
    return out


def env_actors(comp: ComponentId, neighbor: ComponentId, topology: Topology) -> set[Cell]:
    """Cells of `neighbor` 4-adjacent to at least one cell of `comp`."""
    if neighbor not in env_components(comp, topology):
        return set()
    comp_cells = set(topology.component_cells(comp))
    out = set()
    for cell in topology.component_cells(neighbor):
        if any(nb in comp_cells for nb in topology.neighbors4(cell)):
            out.add(cell)
    return out


def scope_env_actor_cells(
    scope: frozenset[ComponentId], topology: Topology
) -> frozenset[Cell]:
    """Out-of-scope cells directly wired to a cell of the scope."""
    in_cells = topology.scope_cells(scope)
    out: set[Cell] = set()
    for cell in in_cells:
        for nb in topology.neighbors4(cell):
            if nb not in in_cells:
                out.add(nb)
    return frozenset(out)


@lru_cache(maxsize=None)
def _topology_cache(n: int, region_size: int) -> Topology:
    return build_mesh(n, region_size)


def cached_mesh(n: int, region_size: int) -> Topology:
    """Shared immutable topology instance (construction is pure)."""
    return _topology_cache(n, region_size)
