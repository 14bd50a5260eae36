"""Warehouse world model: configuration, agents, and immutable snapshots.

The world is a rectangular grid of square cells.  Shelves and the outer
border are blocked; robots, drop stations, and the human worker live on
free cells.  Mutation happens only inside the simulation engine; everything
handed to other modules goes through :func:`snapshot`, which produces a
value copy that later ticks never touch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .geom import Pose
from .planner import GridMap, Trajectory
from .rng import Pcg32
from .tasks import TaskPool

if TYPE_CHECKING:
    from .policy import VisualizationFrame


class ConfigError(ValueError):
    """A configuration invariant was violated; the message names it."""


class RobotStatus(Enum):
    IDLE = "idle"
    TO_SHELF = "to_shelf"
    TO_STATION = "to_station"
    WAITING = "waiting_at_station"
    RETURNING = "returning_home"
    DONE = "done"


# Legal transitions; RETURNING is reachable only with no boxes left to carry.
STATUS_TRANSITIONS = {
    (RobotStatus.IDLE, RobotStatus.TO_SHELF),
    (RobotStatus.TO_SHELF, RobotStatus.TO_STATION),
    (RobotStatus.TO_STATION, RobotStatus.WAITING),
    (RobotStatus.WAITING, RobotStatus.TO_SHELF),
    (RobotStatus.WAITING, RobotStatus.RETURNING),
    (RobotStatus.RETURNING, RobotStatus.DONE),
}


@dataclass(frozen=True)
class Task:
    shelf_cell: tuple[int, int]
    station_id: int


@dataclass(frozen=True)
class WarehouseConfig:
    """Static description of one warehouse scenario.

    Cells are (column, row) grid coordinates; distances are meters.
    """

    width: float
    height: float
    shelf_cells: tuple[tuple[int, int], ...]
    drop_stations: tuple[tuple[int, tuple[int, int]], ...]  # (id, cell)
    n_robots: int
    home_cells: tuple[tuple[int, int], ...]
    worker_start_cell: tuple[int, int]
    rng_seed: int = 0
    cell_size: float = 0.5
    robot_speed: float = 0.5
    boxes_per_robot: int = 3
    unload_radius: float = 1.0
    tick_duration: float = 0.1
    time_cap: float = 3600.0
    worker_fov_half_angle: float = math.pi / 3.0
    worker_sight_range: float = 15.0

    @property
    def columns(self) -> int:
        return int(round(self.width / self.cell_size))

    @property
    def rows(self) -> int:
        return int(round(self.height / self.cell_size))

    def cell_center(self, cell: tuple[int, int]) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.cell_size, (cell[1] + 0.5) * self.cell_size)

    def station_ids(self) -> tuple[int, ...]:
        return tuple(sid for sid, _ in self.drop_stations)

    def validate(self) -> None:
        cs = self.cell_size
        if cs <= 0:
            raise ConfigError("cell_size must be positive")
        for name, value in (("robot_speed", self.robot_speed),
                            ("tick_duration", self.tick_duration),
                            ("unload_radius", self.unload_radius),
                            ("time_cap", self.time_cap),
                            ("worker_sight_range", self.worker_sight_range)):
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.boxes_per_robot < 1:
            raise ConfigError("boxes_per_robot must be >= 1")
        if not 0.0 < self.worker_fov_half_angle <= math.pi:
            raise ConfigError("worker_fov_half_angle must be in (0, pi]")
        if abs(self.width / cs - round(self.width / cs)) > 1e-9:
            raise ConfigError("width must be an integer number of cells")
        if abs(self.height / cs - round(self.height / cs)) > 1e-9:
            raise ConfigError("height must be an integer number of cells")
        cols, rows = self.columns, self.rows
        if cols < 3 or rows < 3:
            raise ConfigError("world must be at least 3x3 cells")
        if self.n_robots < 0:
            raise ConfigError("n_robots must be >= 0")
        if self.n_robots != len(self.home_cells):
            raise ConfigError(
                f"n_robots ({self.n_robots}) != number of home_cells ({len(self.home_cells)})")
        if not self.shelf_cells:
            raise ConfigError("at least one shelf cell is required")
        if not self.drop_stations:
            raise ConfigError("at least one drop station is required")

        shelf_set = set(self.shelf_cells)
        if len(shelf_set) != len(self.shelf_cells):
            raise ConfigError("shelf_cells contains duplicates")

        def check_free(cell: tuple[int, int], what: str) -> None:
            c, r = cell
            if not (0 < c < cols - 1 and 0 < r < rows - 1):
                raise ConfigError(f"{what} {cell} is on the border or out of bounds")
            if cell in shelf_set:
                raise ConfigError(f"{what} {cell} is on a shelf cell")

        for c, r in self.shelf_cells:
            if not (0 <= c < cols and 0 <= r < rows):
                raise ConfigError(f"shelf cell {(c, r)} out of bounds")
        sids = [sid for sid, _ in self.drop_stations]
        if len(set(sids)) != len(sids):
            raise ConfigError("duplicate drop station ids")
        seen: set[tuple[int, int]] = set()
        for sid, cell in self.drop_stations:
            check_free(cell, f"drop station {sid}")
            if cell in seen:
                raise ConfigError(f"drop station {sid} shares cell {cell}")
            seen.add(cell)
        for i, cell in enumerate(self.home_cells):
            check_free(cell, f"home position {i}")
        if len(set(self.home_cells)) != len(self.home_cells):
            raise ConfigError("home_cells contains duplicates")
        check_free(self.worker_start_cell, "worker start")


# ---------------------------------------------------------------------------
# Snapshot (immutable) types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RobotState:
    id: int
    pose: Pose
    status: RobotStatus
    current_task: Optional[Task]
    remaining_tasks: int
    carrying_box: bool
    wait_start: Optional[float]
    trajectory: Optional[Trajectory]


@dataclass(frozen=True)
class HumanWorkerState:
    pose: Pose
    fov_half_angle: float
    sight_range: float
    busy_until: float


@dataclass(frozen=True)
class StationView:
    id: int
    position: tuple[float, float]
    waiting_robot_ids: tuple[int, ...]


@dataclass(frozen=True)
class WorldSnapshot:
    sim_time: float
    robots: tuple[RobotState, ...]
    worker: HumanWorkerState
    stations: tuple[StationView, ...]
    frame: "VisualizationFrame"

    def robot(self, robot_id: int) -> RobotState:
        for r in self.robots:
            if r.id == robot_id:
                return r
        raise KeyError(f"unknown robot id {robot_id}")

    def station(self, station_id: int) -> StationView:
        for s in self.stations:
            if s.id == station_id:
                return s
        raise KeyError(f"unknown station id {station_id}")


# ---------------------------------------------------------------------------
# Live (mutable) state, owned by the simulation thread
# ---------------------------------------------------------------------------

class Robot:
    """Mutable per-robot state while a trial runs."""

    __slots__ = ("id", "pose", "cell", "status", "current_task", "remaining_tasks",
                 "carrying_box", "wait_start", "trajectory", "home_cell",
                 "stuck_since", "slot_cell")

    def __init__(self, robot_id: int, pose: Pose, cell: tuple[int, int],
                 remaining_tasks: int, home_cell: tuple[int, int]):
        self.id = robot_id
        self.pose = pose
        self.cell = cell
        self.status = RobotStatus.IDLE
        self.current_task: Optional[Task] = None
        self.remaining_tasks = remaining_tasks
        self.carrying_box = False
        self.wait_start: Optional[float] = None
        self.trajectory: Optional[Trajectory] = None
        self.home_cell = home_cell
        self.stuck_since: Optional[float] = None
        self.slot_cell: Optional[tuple[int, int]] = None


class Worker:
    """Mutable human-worker state (pose plus the decision-latency gate)."""

    __slots__ = ("pose", "fov_half_angle", "sight_range", "busy_until")

    def __init__(self, pose: Pose, fov_half_angle: float, sight_range: float):
        self.pose = pose
        self.fov_half_angle = fov_half_angle
        self.sight_range = sight_range
        self.busy_until = 0.0


class Station:
    __slots__ = ("id", "cell", "position", "claimed_slots")

    def __init__(self, station_id: int, cell: tuple[int, int], position: tuple[float, float]):
        self.id = station_id
        self.cell = cell
        self.position = position
        self.claimed_slots: dict[tuple[int, int], int] = {}


class World:
    """All mutable trial state.  Single-threaded by contract."""

    __slots__ = ("config", "grid", "robots", "worker", "stations", "pool",
                 "tick", "frame", "rng")

    def __init__(self, config: WarehouseConfig, grid: GridMap, robots: list[Robot],
                 worker: Worker, stations: list[Station], pool: TaskPool, rng: Pcg32):
        self.config = config
        self.grid = grid
        self.robots = robots
        self.worker = worker
        self.stations = stations
        self.pool = pool
        self.tick = 0
        self.frame: Optional["VisualizationFrame"] = None
        self.rng = rng

    @property
    def sim_time(self) -> float:
        return self.tick * self.config.tick_duration

    def station_by_id(self, station_id: int) -> Station:
        for s in self.stations:
            if s.id == station_id:
                return s
        raise KeyError(f"unknown station id {station_id}")

    def waiting_ids_by_station(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {s.id: [] for s in self.stations}
        for r in self.robots:
            if r.status is RobotStatus.WAITING and r.current_task is not None:
                out[r.current_task.station_id].append(r.id)
        return out


def build_world(config: WarehouseConfig) -> World:
    """Construct a fresh world: robots parked at home, worker at its start.

    The world's random stream is seeded from config.rng_seed and is consumed
    first by task-pool construction, then by task draws, in that order.
    """
    config.validate()
    grid = GridMap.from_config(config)
    rng = Pcg32(config.rng_seed)
    pool = TaskPool.build(config, rng)

    robots: list[Robot] = []
    for i in range(config.n_robots):
        cell = config.home_cells[i]
        x, y = config.cell_center(cell)
        robots.append(Robot(i, Pose(x, y, 0.0), cell, config.boxes_per_robot, cell))

    wx, wy = config.cell_center(config.worker_start_cell)
    worker = Worker(Pose(wx, wy, math.pi / 2.0),
                    config.worker_fov_half_angle, config.worker_sight_range)

    stations = [Station(sid, cell, config.cell_center(cell))
                for sid, cell in config.drop_stations]
    return World(config, grid, robots, worker, stations, pool, rng)


def snapshot(world: World) -> WorldSnapshot:
    """Value copy of the current world state.

    Trajectories are frozen at their current progress; the frame is already
    immutable and shared by reference.
    """
    robots = tuple(
        RobotState(
            id=r.id,
            pose=r.pose,
            status=r.status,
            current_task=r.current_task,
            remaining_tasks=r.remaining_tasks,
            carrying_box=r.carrying_box,
            wait_start=r.wait_start,
            trajectory=r.trajectory.freeze() if r.trajectory is not None else None,
        )
        for r in world.robots
    )
    w = world.worker
    worker = HumanWorkerState(w.pose, w.fov_half_angle, w.sight_range, w.busy_until)
    waiting = world.waiting_ids_by_station()
    stations = tuple(
        StationView(s.id, s.position, tuple(waiting[s.id])) for s in world.stations
    )
    frame = world.frame
    if frame is None:
        from .policy import empty_frame
        frame = empty_frame()
    return WorldSnapshot(world.sim_time, robots, worker, stations, frame)
