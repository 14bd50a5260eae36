"""The per-tick simulation loop, the scripted worker, and trial metrics.

Tick order (fixed; determinism depends on it):

1. drain inbound commands (applied only at tick boundaries)
2. robot task logic in ascending id order: dispatch, arrivals, replans
3. robot advancement in ascending id order (lower id wins contested cells)
4. frame render: action queries against the current policy provider (robots
   then stations, ascending id order, which pins the trainer's random-stream
   layout) evaluated on the features extracted last tick, i.e. the display
   lags its inputs by one tick
5. worker: knowledge update from the new frame, target choice with its
   decision latency, movement
6. unloads for waiting robots within the unload radius (gated on the worker
   not being busy)
7. feature extraction for every agent against the settled end-of-tick world
   and the just-rendered frame; these are the states captured at snapshot
   events and consumed next tick
8. time advance and completion check
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from . import features as ft
from . import planner
from .geom import Pose, wrap_angle
from .policy import (Policy, ROBOT_CHANNELS, RobotOverlay, StationVizAction,
                     VisualizationFrame, robot_action_from_bits, robot_color,
                     trajectory_polyline, AVATAR_STEP)
from .rng import derive_seed
from .world import (World, WarehouseConfig, Robot, RobotStatus, Station,
                    WorldSnapshot, build_world, snapshot)
from .tasks import allocate_initial, next_task

STUCK_REPLAN_SECONDS = 30.0
IDLE_SCAN_RATE = 0.5  # rad/s head sweep while standing with nothing to do


@dataclass(frozen=True)
class WorkerParams:
    kind: str = "scripted"   # "scripted" | "teleop"
    speed: float = 1.2
    decision_latency: float = 1.0        # fixed seconds per new target
    latency_per_element: float = 0.15    # extra seconds per visible element

    def __post_init__(self):
        if self.kind not in ("scripted", "teleop"):
            raise ValueError(f"unknown worker kind {self.kind!r}")
        if self.speed <= 0:
            raise ValueError("worker speed must be positive")
        if self.decision_latency < 0 or self.latency_per_element < 0:
            raise ValueError("latency parameters must be >= 0")


@dataclass
class TrialMetrics:
    per_robot_wait: list[float]
    total_wait: float
    completion_time: float
    boxes_delivered: int
    timed_out: bool = False


@dataclass(frozen=True)
class UnloadEvent:
    sim_time: float
    robot_id: int
    station_id: int
    wait: float


@dataclass(frozen=True)
class WorkerCommand:
    """Outcome of one scripted worker decision, for inspection in tests."""
    kind: str                      # "target" | "wander" | "hold"
    station_id: Optional[int] = None
    latency: float = 0.0


class SimulationComplete(Exception):
    pass


class TrialTimeout(Exception):
    """Raised by run_trial when the sim-time cap is hit; carries the
    partial metrics accumulated so far."""

    def __init__(self, metrics: TrialMetrics):
        super().__init__(f"trial exceeded time cap at {metrics.completion_time:.1f}s")
        self.metrics = metrics


# ---------------------------------------------------------------------------
# Worker helpers (pure; shared by the engine and the snapshot-level API)
# ---------------------------------------------------------------------------

def in_view_cone(wx: float, wy: float, heading: float, half_angle: float,
                 sight_range: float, x: float, y: float) -> bool:
    dx = x - wx
    dy = y - wy
    if dx * dx + dy * dy > sight_range * sight_range:
        return False
    if dx == 0.0 and dy == 0.0:
        return True
    return abs(wrap_angle(math.atan2(dy, dx) - heading)) <= half_angle


def line_of_sight(grid, a_cell: tuple[int, int], b_cell: tuple[int, int]) -> bool:
    """Bresenham ray between two cells; blocked if any intermediate cell is."""
    (c0, r0), (c1, r1) = a_cell, b_cell
    dc = abs(c1 - c0)
    dr = abs(r1 - r0)
    sc = 1 if c1 > c0 else -1
    sr = 1 if r1 > r0 else -1
    err = dc - dr
    c, r = c0, r0
    blocked = grid.blocked
    while (c, r) != (c1, r1):
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
        if (c, r) != (c1, r1) and (c, r) in blocked:
            return False
    return True


def visible_element_count(frame: VisualizationFrame, robot_poses: dict[int, Pose],
                          station_positions: dict[int, tuple[float, float]],
                          wx: float, wy: float, heading: float,
                          half_angle: float, sight_range: float) -> int:
    """Enabled overlay elements whose owner sits inside the view cone.

    Overlays render through obstacles (they are drawn on top of the world),
    so no occlusion test applies here.
    """
    n = 0
    for rid, overlay in frame.robots.items():
        pose = robot_poses.get(rid)
        if pose is None:
            continue
        a = overlay.action
        channels = int(a.live_location) + int(a.transparent_avatar) + int(a.trajectory)
        if channels and in_view_cone(wx, wy, heading, half_angle, sight_range,
                                     pose.x, pose.y):
            n += channels
    for sid, balloon_on in frame.stations.items():
        if balloon_on:
            pos = station_positions.get(sid)
            if pos is not None and in_view_cone(wx, wy, heading, half_angle,
                                                sight_range, pos[0], pos[1]):
                n += 1
    return n


def worker_decide(worker_params: WorkerParams, knowledge: set[int],
                  snap: WorldSnapshot) -> WorkerCommand:
    """One scripted decision against a snapshot (knowledge is updated in
    place).  The engine runs the same logic against live state."""
    frame = snap.frame
    wp = snap.worker.pose
    robot_poses = {r.id: r.pose for r in snap.robots}
    station_pos = {s.id: s.position for s in snap.stations}
    waiting = {s.id: s.waiting_robot_ids for s in snap.stations}

    for s in snap.stations:
        if s.id in knowledge:
            continue
        if frame.stations.get(s.id, False):
            knowledge.add(s.id)
            continue
        announced = False
        for rid in s.waiting_robot_ids:
            overlay = frame.robots.get(rid)
            if overlay and (overlay.action.live_location or overlay.action.trajectory):
                announced = True
                break
        if announced:
            knowledge.add(s.id)

    candidates = [sid for sid in sorted(knowledge) if waiting.get(sid)]
    if not candidates:
        return WorkerCommand("wander")
    best = min(candidates,
               key=lambda sid: (math.hypot(station_pos[sid][0] - wp.x,
                                           station_pos[sid][1] - wp.y), sid))
    elements = visible_element_count(frame, robot_poses, station_pos,
                                     wp.x, wp.y, wp.heading,
                                     snap.worker.fov_half_angle,
                                     snap.worker.sight_range)
    latency = worker_params.decision_latency \
        + worker_params.latency_per_element * elements
    return WorkerCommand("target", best, latency)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

_MOVING = (RobotStatus.TO_SHELF, RobotStatus.TO_STATION, RobotStatus.RETURNING)

# Station waiting slots, nearest ring first; each offset is (dcol, drow).
_SLOT_OFFSETS = [(0, 0)]
_SLOT_OFFSETS += sorted(((dc, dr) for dc in (-1, 0, 1) for dr in (-1, 0, 1)
                         if (dc, dr) != (0, 0)), key=lambda o: (o[1], o[0]))
_SLOT_OFFSETS += sorted(((dc, dr) for dc in range(-2, 3) for dr in range(-2, 3)
                         if max(abs(dc), abs(dr)) == 2), key=lambda o: (o[1], o[0]))


class Simulation:
    """Owns one trial: a world, an action provider, and the worker model."""

    def __init__(self, world: World, provider, worker_params: WorkerParams = WorkerParams(),
                 thresholds: ft.DiscretizationThresholds = ft.DiscretizationThresholds(),
                 time_cap: Optional[float] = None):
        self.world = world
        self.provider = provider
        self.worker_params = worker_params
        self.thresholds = thresholds
        self.time_cap = time_cap if time_cap is not None else world.config.time_cap

        cfg = world.config
        self.occupancy: dict[tuple[int, int], int] = {r.cell: r.id for r in world.robots}
        self._shelf_goal_cache: dict[tuple[int, int], tuple[int, int]] = {}
        self._colors = {r.id: robot_color(r.id) for r in world.robots}

        # worker runtime
        self.knowledge: set[int] = set()
        self.worker_target: Optional[int] = None
        self.worker_path: Optional[planner.Trajectory] = None
        self.teleop_velocity = (0.0, 0.0, 0.0)  # forward, strafe, yaw rate

        # metrics
        self.per_robot_wait = [0.0] * cfg.n_robots
        self.boxes_delivered = 0
        self.unload_events: list[UnloadEvent] = []
        self.completion_time: Optional[float] = None
        self.timed_out = False

        # per-tick caches consumed by the trainer
        self.last_robot_states: list[int] = [0] * cfg.n_robots
        self.last_robot_in_fov: list[bool] = [False] * cfg.n_robots
        self.last_station_states: list[int] = [0] * len(world.stations)

        # command plumbing (bridge server feeds this)
        self.command_queue: list = []
        self.channel_overrides: dict[tuple[str, int, str], bool] = {}

        initial = allocate_initial(world.pool, cfg.n_robots)
        for robot, task in zip(world.robots, initial):
            robot.current_task = task

        self.complete = cfg.n_robots == 0
        if self.complete:
            self.completion_time = 0.0
        # initial display: extract against an empty frame, render, then settle
        # the feature caches on what is actually shown
        self._extract_features(0.0)
        self._render_frame()
        self._extract_features(0.0)

    # -- helpers ------------------------------------------------------------

    def _shelf_goal(self, shelf_cell: tuple[int, int]) -> tuple[int, int]:
        """Deterministic free cell adjacent to a shelf (lowest row, column)."""
        goal = self._shelf_goal_cache.get(shelf_cell)
        if goal is not None:
            return goal
        grid = self.world.grid
        c, r = shelf_cell
        options = sorted(((c + dc, r + dr) for dc in (-1, 0, 1) for dr in (-1, 0, 1)
                          if (dc, dr) != (0, 0)), key=lambda cell: (cell[1], cell[0]))
        for cell in options:
            if grid.free(cell):
                self._shelf_goal_cache[shelf_cell] = cell
                return cell
        raise planner.NoPathError(shelf_cell, shelf_cell)

    def _claim_slot(self, station: Station, robot: Robot) -> tuple[int, int]:
        grid = self.world.grid
        c, r = station.cell
        for dc, dr in _SLOT_OFFSETS:
            cell = (c + dc, r + dr)
            if cell in station.claimed_slots or not grid.free(cell):
                continue
            station.claimed_slots[cell] = robot.id
            robot.slot_cell = cell
            return cell
        # every slot taken: fall back to the station cell; the avoidance rule
        # queues the robot next to it until something frees up
        robot.slot_cell = station.cell
        return station.cell

    def _release_slot(self, robot: Robot) -> None:
        if robot.slot_cell is None or robot.current_task is None:
            return
        station = self.world.station_by_id(robot.current_task.station_id)
        if station.claimed_slots.get(robot.slot_cell) == robot.id:
            del station.claimed_slots[robot.slot_cell]
        robot.slot_cell = None

    def _plan_for(self, robot: Robot, goal_cell: tuple[int, int]) -> None:
        cells, cost = planner.plan_cells(self.world.grid, robot.cell, goal_cell)
        robot.trajectory = planner.trajectory_from_cells(self.world.grid, cells, cost)
        robot.stuck_since = None

    def _replan_around_traffic(self, robot: Robot, goal_cell: tuple[int, int]) -> None:
        """Replan treating other robots' current cells as blocked."""
        grid = self.world.grid
        extra = {cell for cell, rid in self.occupancy.items() if rid != robot.id}
        extra.discard(goal_cell)
        patched = planner.GridMap(grid.cell_size, grid.columns, grid.rows,
                                  grid.blocked | frozenset(extra))
        try:
            cells, cost = planner.plan_cells(patched, robot.cell, goal_cell)
        except planner.NoPathError:
            return  # stay put; retry after another stuck interval
        robot.trajectory = planner.trajectory_from_cells(grid, cells, cost)

    def _goal_cell_for(self, robot: Robot) -> Optional[tuple[int, int]]:
        if robot.status is RobotStatus.TO_SHELF and robot.current_task:
            return self._shelf_goal(robot.current_task.shelf_cell)
        if robot.status is RobotStatus.TO_STATION and robot.slot_cell:
            return robot.slot_cell
        if robot.status is RobotStatus.RETURNING:
            return robot.home_cell
        return None

    # -- tick stages ----------------------------------------------------------

    def _robot_task_logic(self, sim_time: float) -> None:
        world = self.world
        for robot in world.robots:
            st = robot.status
            if st is RobotStatus.DONE or st is RobotStatus.WAITING:
                continue
            if st is RobotStatus.IDLE:
                if robot.current_task is not None:
                    self._plan_for(robot, self._shelf_goal(robot.current_task.shelf_cell))
                    robot.status = RobotStatus.TO_SHELF
                continue
            if robot.trajectory is None or not robot.trajectory.done:
                continue
            if st is RobotStatus.TO_SHELF:
                robot.carrying_box = True
                station = world.station_by_id(robot.current_task.station_id)
                slot = self._claim_slot(station, robot)
                self._plan_for(robot, slot)
                robot.status = RobotStatus.TO_STATION
            elif st is RobotStatus.TO_STATION:
                robot.status = RobotStatus.WAITING
                robot.wait_start = sim_time
                robot.trajectory = None
            elif st is RobotStatus.RETURNING:
                robot.status = RobotStatus.DONE
                robot.trajectory = None

    def _advance_robots(self, sim_time: float, dt: float) -> None:
        cfg = self.world.config
        for robot in self.world.robots:
            if robot.status not in _MOVING or robot.trajectory is None:
                continue
            if robot.trajectory.done:
                continue
            moved = planner.advance(robot, dt, cfg.robot_speed, self.occupancy,
                                    self.world.grid)
            if moved:
                robot.stuck_since = None
            elif robot.stuck_since is None:
                robot.stuck_since = sim_time
            elif sim_time - robot.stuck_since >= STUCK_REPLAN_SECONDS:
                goal = self._goal_cell_for(robot)
                if goal is not None:
                    self._replan_around_traffic(robot, goal)
                robot.stuck_since = sim_time

    def _extract_features(self, sim_time: float) -> None:
        world = self.world
        th = self.thresholds
        worker = world.worker
        wx, wy = worker.pose.x, worker.pose.y
        frame = world.frame
        robots = world.robots
        n = len(robots)
        r2 = th.nearby_radius * th.nearby_radius
        per_channel = th.viz_count_per_channel

        channel_counts = [0] * n
        if frame is not None:
            for i, r in enumerate(robots):
                overlay = frame.robots.get(r.id)
                if overlay is not None:
                    a = overlay.action
                    channel_counts[i] = (int(a.live_location)
                                         + int(a.transparent_avatar)
                                         + int(a.trajectory))

        xs = [r.pose.x for r in robots]
        ys = [r.pose.y for r in robots]
        nearby = [0] * n
        viz = [0] * n
        for i in range(n):
            xi, yi = xs[i], ys[i]
            for k in range(i + 1, n):
                dx = xs[k] - xi
                dy = ys[k] - yi
                if dx * dx + dy * dy <= r2:
                    nearby[i] += 1
                    nearby[k] += 1
                    if per_channel:
                        viz[i] += channel_counts[k]
                        viz[k] += channel_counts[i]
                    else:
                        viz[i] += 1 if channel_counts[k] else 0
                        viz[k] += 1 if channel_counts[i] else 0

        fov = worker.fov_half_angle
        sight = worker.sight_range
        heading = worker.pose.heading
        for i, r in enumerate(robots):
            dist = math.hypot(xs[i] - wx, ys[i] - wy)
            picking = r.status is RobotStatus.IDLE or r.status is RobotStatus.TO_SHELF
            wait = sim_time - r.wait_start \
                if r.status is RobotStatus.WAITING and r.wait_start is not None else 0.0
            self.last_robot_states[i] = ft.robot_state_index(
                dist, picking, r.remaining_tasks, wait, nearby[i], viz[i], th)
            self.last_robot_in_fov[i] = in_view_cone(wx, wy, heading, fov, sight,
                                                     xs[i], ys[i])

        waiting = world.waiting_ids_by_station()
        for k, station in enumerate(world.stations):
            ids = waiting[station.id]
            max_wait = 0.0
            for rid in ids:
                ws = world.robots[rid].wait_start
                if ws is not None and sim_time - ws > max_wait:
                    max_wait = sim_time - ws
            dist = math.hypot(station.position[0] - wx, station.position[1] - wy)
            self.last_station_states[k] = ft.station_state_index(
                dist, max_wait, len(ids), th)

    def _query_actions(self):
        provider = self.provider
        overrides = self.channel_overrides
        robot_actions = {}
        for i, robot in enumerate(self.world.robots):
            action = provider.robot_action(robot.id, self.last_robot_states[i],
                                           self.last_robot_in_fov[i])
            if overrides:
                action = self._apply_robot_overrides(robot.id, action)
            robot_actions[robot.id] = action
        station_actions = {}
        for k, station in enumerate(self.world.stations):
            action = provider.station_action(station.id, self.last_station_states[k])
            if overrides:
                key = ("station", station.id, "balloon")
                if key in overrides:
                    action = StationVizAction(overrides[key])
            station_actions[station.id] = action
        return robot_actions, station_actions

    def _apply_robot_overrides(self, robot_id, action):
        bits = list(action.bits())
        changed = False
        for ci, channel in enumerate(ROBOT_CHANNELS):
            key = ("robot", robot_id, channel)
            if key in self.channel_overrides:
                bits[ci] = int(self.channel_overrides[key])
                changed = True
        return robot_action_from_bits(bits) if changed else action

    def _render_frame(self) -> None:
        world = self.world
        robot_actions, station_actions = self._query_actions()
        phase = (world.tick * AVATAR_STEP) % 1.0
        overlays = {}
        for robot in world.robots:
            traj = robot.trajectory
            polyline = trajectory_polyline(traj) if traj is not None else ()
            overlays[robot.id] = RobotOverlay(robot_actions[robot.id],
                                              self._colors[robot.id], polyline, phase)
        stations = {s.id: station_actions[s.id].balloon for s in world.stations}
        world.frame = VisualizationFrame(overlays, stations)

    # -- worker ---------------------------------------------------------------

    def _worker_knowledge_update(self) -> None:
        world = self.world
        frame = world.frame
        worker = world.worker
        grid = world.grid
        waiting = world.waiting_ids_by_station()
        wcell = grid.cell_of(worker.pose.x, worker.pose.y)
        for station in world.stations:
            sid = station.id
            if sid in self.knowledge:
                continue
            if frame.stations.get(sid, False):
                self.knowledge.add(sid)
                continue
            announced = False
            for rid in waiting[sid]:
                overlay = frame.robots.get(rid)
                if overlay and (overlay.action.live_location or overlay.action.trajectory):
                    announced = True
                    break
            if announced:
                self.knowledge.add(sid)
                continue
            if waiting[sid] and in_view_cone(worker.pose.x, worker.pose.y,
                                             worker.pose.heading,
                                             worker.fov_half_angle,
                                             worker.sight_range,
                                             station.position[0], station.position[1]) \
                    and line_of_sight(grid, wcell, station.cell):
                self.knowledge.add(sid)

    def _visible_elements_now(self) -> int:
        world = self.world
        worker = world.worker
        poses = {r.id: r.pose for r in world.robots}
        positions = {s.id: s.position for s in world.stations}
        return visible_element_count(world.frame, poses, positions,
                                     worker.pose.x, worker.pose.y,
                                     worker.pose.heading, worker.fov_half_angle,
                                     worker.sight_range)

    def _worker_plan_to(self, goal_cell: tuple[int, int]) -> None:
        grid = self.world.grid
        start = grid.cell_of(self.world.worker.pose.x, self.world.worker.pose.y)
        try:
            cells, cost = planner.plan_cells(grid, start, goal_cell)
        except planner.NoPathError:
            self.worker_path = None
            return
        self.worker_path = planner.trajectory_from_cells(grid, cells, cost)

    def _worker_scripted(self, sim_time: float, dt: float) -> None:
        world = self.world
        worker = world.worker
        self._worker_knowledge_update()
        waiting = world.waiting_ids_by_station()

        if self.worker_target is not None and not waiting[self.worker_target]:
            self.worker_target = None
            self.worker_path = None

        if self.worker_target is None:
            candidates = [sid for sid in sorted(self.knowledge) if waiting[sid]]
            if candidates:
                positions = {s.id: s.position for s in world.stations}
                best = min(candidates,
                           key=lambda sid: (math.hypot(positions[sid][0] - worker.pose.x,
                                                       positions[sid][1] - worker.pose.y),
                                            sid))
                self.worker_target = best
                elements = self._visible_elements_now()
                worker.busy_until = sim_time + self.worker_params.decision_latency \
                    + self.worker_params.latency_per_element * elements
                station = world.station_by_id(best)
                self._worker_plan_to(station.cell)
            else:
                # nothing known: drift toward the middle of the floor and scan
                if self.worker_path is None or self.worker_path.done:
                    center = self._center_cell()
                    here = world.grid.cell_of(worker.pose.x, worker.pose.y)
                    if here != center:
                        self._worker_plan_to(center)
                    else:
                        self.worker_path = None
                if self.worker_path is None:
                    worker.pose = Pose(worker.pose.x, worker.pose.y,
                                       wrap_angle(worker.pose.heading
                                                  + IDLE_SCAN_RATE * dt))
                    return

        if sim_time < worker.busy_until:
            return

        path = self.worker_path
        if path is not None and not path.done:
            new_progress = min(path.progress + self.worker_params.speed * dt,
                               path.total_length)
            path.progress = new_progress
            worker.pose = path.pose_at(new_progress)
        elif self.worker_target is not None:
            # at the station; shuffle toward the nearest still-waiting robot
            ids = waiting[self.worker_target]
            if ids:
                nearest = min(ids, key=lambda rid: (
                    math.hypot(world.robots[rid].pose.x - worker.pose.x,
                               world.robots[rid].pose.y - worker.pose.y), rid))
                r = world.robots[nearest]
                dist = math.hypot(r.pose.x - worker.pose.x, r.pose.y - worker.pose.y)
                if dist > world.config.unload_radius:
                    self._worker_plan_to(r.cell)

    def _worker_teleop(self, dt: float) -> None:
        world = self.world
        worker = world.worker
        forward, strafe, yaw_rate = self.teleop_velocity
        heading = wrap_angle(worker.pose.heading + yaw_rate * dt)
        speed = self.worker_params.speed
        dx = (math.cos(heading) * forward - math.sin(heading) * strafe) * speed * dt
        dy = (math.sin(heading) * forward + math.cos(heading) * strafe) * speed * dt
        nx, ny = worker.pose.x + dx, worker.pose.y + dy
        if world.grid.free(world.grid.cell_of(nx, ny)):
            worker.pose = Pose(nx, ny, heading)
        else:
            worker.pose = Pose(worker.pose.x, worker.pose.y, heading)

    def _center_cell(self) -> tuple[int, int]:
        grid = self.world.grid
        c0 = grid.columns // 2
        r0 = grid.rows // 2
        if grid.free((c0, r0)):
            return (c0, r0)
        for radius in range(1, max(grid.columns, grid.rows)):
            for dr in range(-radius, radius + 1):
                for dc in range(-radius, radius + 1):
                    if max(abs(dc), abs(dr)) != radius:
                        continue
                    cell = (c0 + dc, r0 + dr)
                    if grid.free(cell):
                        return cell
        raise RuntimeError("no free cell in grid")

    # -- unloads ---------------------------------------------------------------

    def _unloads(self, sim_time: float) -> None:
        world = self.world
        worker = world.worker
        if sim_time < worker.busy_until:
            return
        radius = world.config.unload_radius
        for robot in world.robots:
            if robot.status is not RobotStatus.WAITING:
                continue
            dist = math.hypot(robot.pose.x - worker.pose.x,
                              robot.pose.y - worker.pose.y)
            if dist > radius:
                continue
            wait = sim_time - robot.wait_start
            self.per_robot_wait[robot.id] += wait
            self.boxes_delivered += 1
            self.unload_events.append(UnloadEvent(sim_time, robot.id,
                                                  robot.current_task.station_id, wait))
            self._release_slot(robot)
            robot.wait_start = None
            robot.carrying_box = False
            robot.remaining_tasks -= 1
            if robot.remaining_tasks <= 0:
                robot.current_task = None
                self._plan_for(robot, robot.home_cell)
                robot.status = RobotStatus.RETURNING
            else:
                task = next_task(world.pool)
                if task is None:
                    # pool drained early (undersized pool): head home anyway
                    robot.current_task = None
                    self._plan_for(robot, robot.home_cell)
                    robot.status = RobotStatus.RETURNING
                else:
                    robot.current_task = task
                    self._plan_for(robot, self._shelf_goal(task.shelf_cell))
                    robot.status = RobotStatus.TO_SHELF

    # -- command plumbing --------------------------------------------------------

    def _drain_commands(self) -> None:
        if not self.command_queue:
            return
        queue, self.command_queue = self.command_queue, []
        for cmd in queue:
            cmd(self)

    # -- public stepping -----------------------------------------------------------

    def tick_once(self) -> None:
        if self.complete:
            raise SimulationComplete("trial already complete")
        if self.timed_out:
            raise SimulationComplete("trial hit its time cap")
        world = self.world
        dt = world.config.tick_duration
        sim_time = world.sim_time

        self._drain_commands()
        self._robot_task_logic(sim_time)
        self._advance_robots(sim_time, dt)
        self._render_frame()  # actions from last tick's features
        if self.worker_params.kind == "teleop":
            self._worker_teleop(dt)
        else:
            self._worker_scripted(sim_time, dt)
        self._unloads(sim_time)
        self._extract_features(sim_time + dt)  # the settled end-of-tick world

        world.tick += 1
        if all(r.status is RobotStatus.DONE for r in world.robots):
            self.complete = True
            self.completion_time = world.sim_time
        elif world.sim_time >= self.time_cap:
            self.timed_out = True

    def step(self, dt: Optional[float] = None) -> WorldSnapshot:
        """Advance one tick and return an immutable snapshot.

        dt, when given, must equal the configured tick duration; the tick
        grid is what keeps capture cadences and replays exact.
        """
        if dt is not None and abs(dt - self.world.config.tick_duration) > 1e-12:
            raise ValueError("step dt must equal the configured tick_duration")
        self.tick_once()
        return snapshot(self.world)

    def metrics(self) -> TrialMetrics:
        """Metrics so far; waits still accruing are counted up to now."""
        sim_time = self.world.sim_time
        per_robot = list(self.per_robot_wait)
        for robot in self.world.robots:
            if robot.status is RobotStatus.WAITING and robot.wait_start is not None:
                per_robot[robot.id] += sim_time - robot.wait_start
        total = sum(per_robot)
        completion = self.completion_time if self.completion_time is not None else sim_time
        return TrialMetrics(per_robot, total, completion, self.boxes_delivered,
                            timed_out=self.timed_out)


def run_trial(config: WarehouseConfig, policy: Policy,
              worker_params: WorkerParams = WorkerParams(),
              thresholds: ft.DiscretizationThresholds = ft.DiscretizationThresholds(),
              seed: Optional[int] = None,
              time_cap: Optional[float] = None) -> TrialMetrics:
    """Run one trial to completion; deterministic for fixed inputs.

    Raises TrialTimeout (carrying partial metrics) if the sim-time cap is
    exceeded before every robot is back home.
    """
    if seed is not None:
        config = replace(config, rng_seed=seed)
    world = build_world(config)
    sim = Simulation(world, policy, worker_params, thresholds, time_cap)
    while not sim.complete:
        if sim.timed_out:
            raise TrialTimeout(sim.metrics())
        sim.tick_once()
    return sim.metrics()


def trial_factory_for(config: WarehouseConfig,
                      worker_params: WorkerParams = WorkerParams(),
                      thresholds: ft.DiscretizationThresholds = ft.DiscretizationThresholds(),
                      time_cap: Optional[float] = None):
    """Factory for the trainer: trial k runs on a child seed of the config's."""

    def factory(trial_index: int, provider) -> Simulation:
        cfg = replace(config, rng_seed=derive_seed(config.rng_seed, trial_index))
        world = build_world(cfg)
        return Simulation(world, provider, worker_params, thresholds, time_cap)

    return factory
