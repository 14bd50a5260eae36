"""Shared fixtures and independent oracles used across the suite."""

from __future__ import annotations

import heapq
import random

import pytest

from warevis.configs import mini_config
from warevis.planner import COST_DIAG, COST_STRAIGHT, GridMap
from warevis.world import WarehouseConfig


def micro_config(n_robots: int = 1, seed: int = 0, **overrides) -> WarehouseConfig:
    """A 10 m x 6 m corridor world: one shelf block, one station."""
    defaults = dict(
        width=10.0,
        height=6.0,
        shelf_cells=((10, 5), (10, 6)),
        drop_stations=((0, (3, 3)),),
        n_robots=n_robots,
        home_cells=tuple((16, 2 + i) for i in range(n_robots)),
        worker_start_cell=(4, 3),
        rng_seed=seed,
    )
    defaults.update(overrides)
    return WarehouseConfig(**defaults)


def dijkstra_cost(grid: GridMap, start: tuple[int, int],
                  goal: tuple[int, int]) -> int | None:
    """Independent shortest-path oracle (no heuristic, no tie-breaking)."""
    dist = {start: 0}
    heap = [(0, start)]
    seen = set()
    while heap:
        d, cell = heapq.heappop(heap)
        if cell in seen:
            continue
        seen.add(cell)
        if cell == goal:
            return d
        c, r = cell
        for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1),
                       (1, 1), (1, -1), (-1, 1), (-1, -1)):
            ncell = (c + dc, r + dr)
            if not grid.free(ncell):
                continue
            if dc and dr and ((c + dc, r) in grid.blocked or (c, r + dr) in grid.blocked):
                continue
            step = COST_DIAG if dc and dr else COST_STRAIGHT
            nd = d + step
            if nd < dist.get(ncell, nd + 1):
                dist[ncell] = nd
                heapq.heappush(heap, (nd, ncell))
    return None


def random_grid(rng: random.Random, cols: int = 20, rows: int = 20,
                blockage: float = 0.2, cell_size: float = 0.5) -> GridMap:
    blocked = set()
    for c in range(cols):
        blocked.add((c, 0))
        blocked.add((c, rows - 1))
    for r in range(rows):
        blocked.add((0, r))
        blocked.add((cols - 1, r))
    for c in range(1, cols - 1):
        for r in range(1, rows - 1):
            if rng.random() < blockage:
                blocked.add((c, r))
    return GridMap(cell_size, cols, rows, frozenset(blocked))


@pytest.fixture(scope="session")
def mini_cfg():
    return mini_config(0)
