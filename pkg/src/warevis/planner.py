"""Grid path planning and kinematic advancement.

Paths are shortest 8-connected routes under the octile metric.  Costs are
kept as exact integers (straight = 10_000_000, diagonal = 14_142_136, i.e.
sqrt(2) scaled and rounded) so that path costs compare exactly across
implementations and platforms.  Expansion ties break lexicographically on
(row, column), which pins the returned path.

Diagonal moves may not cut corners: both orthogonally adjacent cells must
be free.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from heapq import heappush, heappop
from typing import TYPE_CHECKING

from .geom import Pose

if TYPE_CHECKING:
    from .world import WarehouseConfig

COST_SCALE = 10_000_000
COST_STRAIGHT = COST_SCALE
COST_DIAG = 14_142_136  # round(sqrt(2) * COST_SCALE)

_NEIGHBORS = (
    (1, 0, COST_STRAIGHT), (-1, 0, COST_STRAIGHT),
    (0, 1, COST_STRAIGHT), (0, -1, COST_STRAIGHT),
    (1, 1, COST_DIAG), (1, -1, COST_DIAG),
    (-1, 1, COST_DIAG), (-1, -1, COST_DIAG),
)


class NoPathError(Exception):
    def __init__(self, start_cell: tuple[int, int], goal_cell: tuple[int, int]):
        super().__init__(f"no path from cell {start_cell} to cell {goal_cell}")
        self.start_cell = start_cell
        self.goal_cell = goal_cell


@dataclass(frozen=True)
class GridMap:
    cell_size: float
    columns: int
    rows: int
    blocked: frozenset[tuple[int, int]]

    @classmethod
    def from_config(cls, config: "WarehouseConfig") -> "GridMap":
        cols, rows = config.columns, config.rows
        blocked = set(config.shelf_cells)
        for c in range(cols):
            blocked.add((c, 0))
            blocked.add((c, rows - 1))
        for r in range(rows):
            blocked.add((0, r))
            blocked.add((cols - 1, r))
        return cls(config.cell_size, cols, rows, frozenset(blocked))

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.columns and 0 <= cell[1] < self.rows

    def free(self, cell: tuple[int, int]) -> bool:
        return self.in_bounds(cell) and cell not in self.blocked

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (int(x // self.cell_size), int(y // self.cell_size))

    def center(self, cell: tuple[int, int]) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.cell_size, (cell[1] + 0.5) * self.cell_size)


class Trajectory:
    """A planned path plus how far along it the robot has driven.

    Waypoints are cell centers with headings facing the next waypoint.
    `cumulative` holds the arc length (meters) at each waypoint, so pose
    interpolation and per-vertex distance-to-goal are O(log n).
    """

    __slots__ = ("waypoints", "total_length", "progress", "cumulative", "_polyline")

    def __init__(self, waypoints: tuple, total_length: float,
                 cumulative: tuple[float, ...], progress: float = 0.0):
        self.waypoints = waypoints
        self.total_length = total_length
        self.cumulative = cumulative
        self.progress = progress
        self._polyline = None  # render cache, built lazily

    @property
    def done(self) -> bool:
        return self.progress >= self.total_length - 1e-12

    def pose_at(self, progress: float) -> Pose:
        wp = self.waypoints
        if len(wp) == 1 or progress <= 0.0:
            return wp[0]
        if progress >= self.total_length:
            return wp[-1]
        i = bisect_right(self.cumulative, progress) - 1
        if i >= len(wp) - 1:
            return wp[-1]
        seg = self.cumulative[i + 1] - self.cumulative[i]
        t = (progress - self.cumulative[i]) / seg
        a, b = wp[i], wp[i + 1]
        return Pose(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, a.heading)

    def freeze(self) -> "Trajectory":
        """Copy with the current progress; waypoints are shared (immutable)."""
        return Trajectory(self.waypoints, self.total_length, self.cumulative, self.progress)


def _octile(a: tuple[int, int], b: tuple[int, int]) -> int:
    dc = abs(a[0] - b[0])
    dr = abs(a[1] - b[1])
    lo, hi = (dc, dr) if dc < dr else (dr, dc)
    return (hi - lo) * COST_STRAIGHT + lo * COST_DIAG


def plan_cells(grid: GridMap, start_cell: tuple[int, int],
               goal_cell: tuple[int, int]) -> tuple[list[tuple[int, int]], int]:
    """A* from cell to cell. Returns (cell path, exact integer cost)."""
    if not grid.free(start_cell) or not grid.free(goal_cell):
        raise NoPathError(start_cell, goal_cell)
    if start_cell == goal_cell:
        return [start_cell], 0

    blocked = grid.blocked
    cols, rows = grid.columns, grid.rows
    g: dict[tuple[int, int], int] = {start_cell: 0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    closed: set[tuple[int, int]] = set()
    heap: list[tuple[int, int, int]] = [(_octile(start_cell, goal_cell),
                                         start_cell[1], start_cell[0])]
    while heap:
        _, r, c = heappop(heap)
        cell = (c, r)
        if cell in closed:
            continue
        closed.add(cell)
        if cell == goal_cell:
            path = [cell]
            while cell != start_cell:
                cell = parent[cell]
                path.append(cell)
            path.reverse()
            return path, g[goal_cell]
        base = g[cell]
        for dc, dr, cost in _NEIGHBORS:
            nc, nr = c + dc, r + dr
            ncell = (nc, nr)
            if not (0 <= nc < cols and 0 <= nr < rows) or ncell in blocked:
                continue
            if dc and dr and ((c + dc, r) in blocked or (c, r + dr) in blocked):
                continue  # no corner cutting
            ng = base + cost
            if ng < g.get(ncell, ng + 1):
                g[ncell] = ng
                parent[ncell] = cell
                heappush(heap, (ng + _octile(ncell, goal_cell), nr, nc))
    raise NoPathError(start_cell, goal_cell)


def trajectory_from_cells(grid: GridMap, cells: list[tuple[int, int]],
                          cost: int) -> Trajectory:
    cs = grid.cell_size
    n = len(cells)
    if n == 1:
        x, y = grid.center(cells[0])
        return Trajectory((Pose(x, y, 0.0),), 0.0, (0.0,))
    headings = []
    for i in range(n - 1):
        (c0, r0), (c1, r1) = cells[i], cells[i + 1]
        headings.append(math.atan2((r1 - r0), (c1 - c0)))
    headings.append(headings[-1])
    waypoints = []
    cumulative = [0.0]
    acc = 0.0
    for i, cell in enumerate(cells):
        x, y = grid.center(cell)
        waypoints.append(Pose(x, y, headings[i]))
        if i < n - 1:
            step = COST_DIAG if (cells[i][0] != cells[i + 1][0]
                                 and cells[i][1] != cells[i + 1][1]) else COST_STRAIGHT
            acc += step * cs / COST_SCALE
            cumulative.append(acc)
    total = cost * cs / COST_SCALE
    return Trajectory(tuple(waypoints), total, tuple(cumulative))


def plan(grid: GridMap, start: Pose, goal: Pose) -> Trajectory:
    """Shortest trajectory between the cells containing two poses."""
    start_cell = grid.cell_of(start.x, start.y)
    goal_cell = grid.cell_of(goal.x, goal.y)
    cells, cost = plan_cells(grid, start_cell, goal_cell)
    return trajectory_from_cells(grid, cells, cost)


def advance(robot, dt: float, speed: float, occupancy: dict[tuple[int, int], int],
            grid: GridMap) -> bool:
    """Drive a robot along its trajectory by speed*dt.

    A robot may not enter a cell another robot currently holds; it simply
    holds position for the tick (the caller processes robots in ascending id
    order, which gives lower ids priority at contested cells).  Returns True
    if the robot moved.
    """
    traj = robot.trajectory
    if traj is None or traj.done:
        return False
    new_progress = traj.progress + speed * dt
    if new_progress > traj.total_length:
        new_progress = traj.total_length
    pose = traj.pose_at(new_progress)
    new_cell = grid.cell_of(pose.x, pose.y)
    cur_cell = robot.cell
    if new_cell != cur_cell:
        holder = occupancy.get(new_cell)
        if holder is not None and holder != robot.id:
            return False
        del occupancy[cur_cell]
        occupancy[new_cell] = robot.id
        robot.cell = new_cell
    traj.progress = new_progress
    robot.pose = pose
    return True
