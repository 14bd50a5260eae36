"""Discretization of world state into finite per-agent feature vectors.

Robot agents see six discrete fields (144 joint states); drop-station
agents see three (18 joint states).  Binning is half-open: a distance
exactly at a boundary falls in the upper bin.  Encoding is mixed-radix in
declared field order, so the all-first-values vector maps to index 0 and
encode/decode are exact inverses over the full product space.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields
from typing import TYPE_CHECKING

from .world import RobotStatus

if TYPE_CHECKING:
    from .world import WorldSnapshot

HUMAN_STATES = ("close", "moderate", "far")
TASK_STATES = ("picking", "dropping")
REMAINING_STATES = ("few", "many")
WAITING_STATES = ("short", "medium", "long")
NEARBY_STATES = ("few", "many")
VIZ_STATES = ("few", "many")

ROBOT_FIELD_VALUES = (HUMAN_STATES, TASK_STATES, REMAINING_STATES,
                      WAITING_STATES, NEARBY_STATES, VIZ_STATES)
STATION_FIELD_VALUES = (HUMAN_STATES, WAITING_STATES, NEARBY_STATES)

N_ROBOT_STATES = 144   # 3 * 2 * 2 * 3 * 2 * 2
N_STATION_STATES = 18  # 3 * 3 * 2

_PICKING_STATUSES = (RobotStatus.IDLE, RobotStatus.TO_SHELF)


class UnknownAgentError(KeyError):
    pass


@dataclass(frozen=True)
class DiscretizationThresholds:
    """Bin boundaries.  The feature names are fixed; the boundaries are not,
    so every one of them is configurable."""

    human_close: float = 3.0
    human_moderate: float = 10.0
    wait_short: float = 10.0
    wait_medium: float = 30.0
    remaining_few_max: int = 1
    nearby_radius: float = 5.0
    nearby_few_max: int = 2
    viz_few_max: int = 2
    station_few_max: int = 1
    # When True, nearbyRobotVizStatus counts enabled channels instead of
    # robots with at least one enabled channel.
    viz_count_per_channel: bool = False

    def __post_init__(self):
        if not self.human_close < self.human_moderate:
            raise ValueError("human_close must be < human_moderate")
        if not self.wait_short < self.wait_medium:
            raise ValueError("wait_short must be < wait_medium")
        for name in ("human_close", "wait_short", "nearby_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("remaining_few_max", "nearby_few_max", "viz_few_max",
                     "station_few_max"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def fingerprint(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            parts.append(f"{f.name}={v:.6f}" if isinstance(v, float) else f"{f.name}={v}")
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class RobotAgentFeatures:
    human_state: str
    robot_task_state: str
    robot_remaining_tasks: str
    robot_waiting_time: str
    nearby_robots: str
    nearby_robot_viz_status: str


@dataclass(frozen=True)
class StationAgentFeatures:
    human_state: str
    robots_waiting_time_ds: str
    n_robots_at_drop_station: str


# -- mixed-radix encoding ----------------------------------------------------

def encode_robot(f: RobotAgentFeatures) -> int:
    i = HUMAN_STATES.index(f.human_state)
    i = i * 2 + TASK_STATES.index(f.robot_task_state)
    i = i * 2 + REMAINING_STATES.index(f.robot_remaining_tasks)
    i = i * 3 + WAITING_STATES.index(f.robot_waiting_time)
    i = i * 2 + NEARBY_STATES.index(f.nearby_robots)
    i = i * 2 + VIZ_STATES.index(f.nearby_robot_viz_status)
    return i


def decode_robot(index: int) -> RobotAgentFeatures:
    if not 0 <= index < N_ROBOT_STATES:
        raise ValueError(f"robot state index out of range: {index}")
    index, viz = divmod(index, 2)
    index, nearby = divmod(index, 2)
    index, wait = divmod(index, 3)
    index, remaining = divmod(index, 2)
    human, task = divmod(index, 2)
    return RobotAgentFeatures(HUMAN_STATES[human], TASK_STATES[task],
                              REMAINING_STATES[remaining], WAITING_STATES[wait],
                              NEARBY_STATES[nearby], VIZ_STATES[viz])


def encode_station(f: StationAgentFeatures) -> int:
    i = HUMAN_STATES.index(f.human_state)
    i = i * 3 + WAITING_STATES.index(f.robots_waiting_time_ds)
    i = i * 2 + NEARBY_STATES.index(f.n_robots_at_drop_station)
    return i


def decode_station(index: int) -> StationAgentFeatures:
    if not 0 <= index < N_STATION_STATES:
        raise ValueError(f"station state index out of range: {index}")
    index, count = divmod(index, 2)
    human, wait = divmod(index, 3)
    return StationAgentFeatures(HUMAN_STATES[human], WAITING_STATES[wait],
                                NEARBY_STATES[count])


# -- binning core (shared by the snapshot API and the engine hot path) -------

def distance_bin(dist: float, th: DiscretizationThresholds) -> int:
    if dist < th.human_close:
        return 0
    if dist < th.human_moderate:
        return 1
    return 2


def wait_bin(wait_seconds: float, th: DiscretizationThresholds) -> int:
    if wait_seconds < th.wait_short:
        return 0
    if wait_seconds < th.wait_medium:
        return 1
    return 2


def robot_state_index(worker_dist: float, picking: bool, remaining_tasks: int,
                      wait_seconds: float, nearby_count: int, nearby_viz_count: int,
                      th: DiscretizationThresholds) -> int:
    i = distance_bin(worker_dist, th)
    i = i * 2 + (0 if picking else 1)
    i = i * 2 + (0 if remaining_tasks <= th.remaining_few_max else 1)
    i = i * 3 + wait_bin(wait_seconds, th)
    i = i * 2 + (0 if nearby_count <= th.nearby_few_max else 1)
    i = i * 2 + (0 if nearby_viz_count <= th.viz_few_max else 1)
    return i


def station_state_index(worker_dist: float, max_wait_seconds: float,
                        n_waiting: int, th: DiscretizationThresholds) -> int:
    i = distance_bin(worker_dist, th)
    i = i * 3 + wait_bin(max_wait_seconds, th)
    i = i * 2 + (0 if n_waiting <= th.station_few_max else 1)
    return i


# -- snapshot-level extraction ------------------------------------------------

def _frame_channel_count(frame, robot_id: int) -> int:
    overlay = frame.robots.get(robot_id)
    if overlay is None:
        return 0
    a = overlay.action
    return int(a.live_location) + int(a.transparent_avatar) + int(a.trajectory)


def extract_robot_features(snap: "WorldSnapshot", robot_id: int,
                           th: DiscretizationThresholds) -> RobotAgentFeatures:
    try:
        robot = snap.robot(robot_id)
    except KeyError as e:
        raise UnknownAgentError(str(e)) from e
    wp = snap.worker.pose
    worker_dist = math.hypot(robot.pose.x - wp.x, robot.pose.y - wp.y)
    picking = robot.status in _PICKING_STATUSES
    wait = (snap.sim_time - robot.wait_start
            if robot.status is RobotStatus.WAITING and robot.wait_start is not None
            else 0.0)
    nearby = 0
    viz = 0
    r2 = th.nearby_radius * th.nearby_radius
    for other in snap.robots:
        if other.id == robot_id:
            continue
        dx = other.pose.x - robot.pose.x
        dy = other.pose.y - robot.pose.y
        if dx * dx + dy * dy <= r2:
            nearby += 1
            channels = _frame_channel_count(snap.frame, other.id)
            if th.viz_count_per_channel:
                viz += channels
            elif channels > 0:
                viz += 1
    index = robot_state_index(worker_dist, picking, robot.remaining_tasks,
                              wait, nearby, viz, th)
    return decode_robot(index)


def extract_station_features(snap: "WorldSnapshot", station_id: int,
                             th: DiscretizationThresholds) -> StationAgentFeatures:
    try:
        station = snap.station(station_id)
    except KeyError as e:
        raise UnknownAgentError(str(e)) from e
    wp = snap.worker.pose
    worker_dist = math.hypot(station.position[0] - wp.x, station.position[1] - wp.y)
    max_wait = 0.0
    for rid in station.waiting_robot_ids:
        r = snap.robot(rid)
        if r.wait_start is not None:
            max_wait = max(max_wait, snap.sim_time - r.wait_start)
    index = station_state_index(worker_dist, max_wait,
                                len(station.waiting_robot_ids), th)
    return decode_station(index)
