"""Visualization actions, policies, trainable classifiers, and the frame
renderer.

Actions decompose into independent binary channels: three per robot
(live-location avatar, transparent avatar, trajectory) and one per drop
station (balloon).  A policy maps an agent's own discrete feature state to
an action; execution never sees another agent's state.  Two learners are
provided: a per-state majority table (the reference learner) and one-vs-rest
linear separators over one-hot states trained by deterministic subgradient
descent on the hinge loss.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass
from typing import Optional

from . import features as ft

ROBOT_CHANNELS = ("live_location", "transparent_avatar", "trajectory")
STATION_CHANNELS = ("balloon",)

# Trajectory width rule: w(d) = WIDTH_BASE * (1 + WIDTH_GAIN * d / L) where d
# is the arc distance from a vertex to the goal and L the total length, so
# the ribbon is widest far from the goal and narrows to WIDTH_BASE at it.
WIDTH_BASE = 0.1
WIDTH_GAIN = 2.0
# The transparent avatar slides along the trajectory by this fraction per
# tick, wrapping at 1.
AVATAR_STEP = 0.01


class TrainingError(Exception):
    pass


@dataclass(frozen=True)
class RobotVizAction:
    live_location: bool
    transparent_avatar: bool
    trajectory: bool

    def bits(self) -> tuple[int, int, int]:
        return (int(self.live_location), int(self.transparent_avatar),
                int(self.trajectory))

    @classmethod
    def from_bits(cls, bits) -> "RobotVizAction":
        return cls(bool(bits[0]), bool(bits[1]), bool(bits[2]))

    @property
    def any_on(self) -> bool:
        return self.live_location or self.transparent_avatar or self.trajectory


@dataclass(frozen=True)
class StationVizAction:
    balloon: bool

    def bits(self) -> tuple[int]:
        return (int(self.balloon),)

    @classmethod
    def from_bits(cls, bits) -> "StationVizAction":
        return cls(bool(bits[0]))


ROBOT_ALL_ON = RobotVizAction(True, True, True)
ROBOT_ALL_OFF = RobotVizAction(False, False, False)
STATION_ON = StationVizAction(True)
STATION_OFF = StationVizAction(False)

_ROBOT_ACTIONS = tuple(RobotVizAction(bool(b >> 2 & 1), bool(b >> 1 & 1), bool(b & 1))
                       for b in range(8))


def robot_action_from_bits(bits) -> RobotVizAction:
    return _ROBOT_ACTIONS[(bits[0] << 2) | (bits[1] << 1) | bits[2]]


# ---------------------------------------------------------------------------
# Frame
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RobotOverlay:
    action: RobotVizAction
    color: str
    polyline: tuple[tuple[float, float, float], ...]  # (x, y, width)
    avatar_phase: float


@dataclass(frozen=True)
class VisualizationFrame:
    robots: dict[int, RobotOverlay]
    stations: dict[int, bool]  # balloon enabled

    def enabled_channel_count(self) -> int:
        n = 0
        for overlay in self.robots.values():
            a = overlay.action
            n += int(a.live_location) + int(a.transparent_avatar) + int(a.trajectory)
        n += sum(1 for on in self.stations.values() if on)
        return n


def empty_frame() -> VisualizationFrame:
    return VisualizationFrame({}, {})


def robot_color(robot_id: int) -> str:
    """Distinct, stable per-robot color (golden-angle hue spacing)."""
    hue = (robot_id * 0.6180339887498949) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.85, 0.95)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


def trajectory_polyline(traj) -> tuple[tuple[float, float, float], ...]:
    """Per-vertex (x, y, width) for a trajectory, cached on the trajectory.

    Width follows the remaining-distance rule, so it is static per plan.
    """
    cached = traj._polyline
    if cached is not None:
        return cached
    total = traj.total_length
    points = []
    for pose, cum in zip(traj.waypoints, traj.cumulative):
        d = total - cum
        w = WIDTH_BASE * (1.0 + WIDTH_GAIN * d / total) if total > 0 else WIDTH_BASE
        points.append((pose.x, pose.y, w))
    result = tuple(points)
    traj._polyline = result
    return result


def render_frame(snap, robot_actions: dict[int, RobotVizAction],
                 station_actions: dict[int, StationVizAction],
                 avatar_phase: float = 0.0) -> VisualizationFrame:
    """Build the frame for a snapshot from per-agent actions.

    Every robot and station must be covered by the action maps.
    """
    robots: dict[int, RobotOverlay] = {}
    for r in snap.robots:
        action = robot_actions[r.id]
        polyline = trajectory_polyline(r.trajectory) if r.trajectory is not None else ()
        robots[r.id] = RobotOverlay(action, robot_color(r.id), polyline, avatar_phase)
    stations = {s.id: station_actions[s.id].balloon for s in snap.stations}
    return VisualizationFrame(robots, stations)


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

class Policy:
    """Maps an agent's own feature state to a visualization action.

    `robot_action`/`station_action` are the execution interface used by the
    simulation engine; the agent id is accepted (and ignored by every
    learned policy) so that interactive sources can slot in behind the same
    calls.  `in_fov` reports whether this robot currently sits inside the
    worker's view cone; only the field-of-view-aware static baseline reads
    it.
    """

    kind: str = "abstract"
    version: int = 0

    def act_robot_index(self, state: int, in_fov: bool = True) -> RobotVizAction:
        raise NotImplementedError

    def act_station_index(self, state: int) -> StationVizAction:
        raise NotImplementedError

    def act_robot(self, f: ft.RobotAgentFeatures, in_fov: bool = True) -> RobotVizAction:
        return self.act_robot_index(ft.encode_robot(f), in_fov)

    def act_station(self, f: ft.StationAgentFeatures) -> StationVizAction:
        return self.act_station_index(ft.encode_station(f))

    def robot_action(self, robot_id: int, state: int, in_fov: bool) -> RobotVizAction:
        return self.act_robot_index(state, in_fov)

    def station_action(self, station_id: int, state: int) -> StationVizAction:
        return self.act_station_index(state)

    def robot_table(self) -> list[RobotVizAction]:
        """Decision table over all robot states (with in_fov pinned True)."""
        return [self.act_robot_index(s) for s in range(ft.N_ROBOT_STATES)]

    def station_table(self) -> list[StationVizAction]:
        return [self.act_station_index(s) for s in range(ft.N_STATION_STATES)]


class AllOnPolicy(Policy):
    kind = "allon"

    def act_robot_index(self, state, in_fov=True):
        return ROBOT_ALL_ON

    def act_station_index(self, state):
        return STATION_ON


class NoVizPolicy(Policy):
    kind = "noviz"

    def act_robot_index(self, state, in_fov=True):
        return ROBOT_ALL_OFF

    def act_station_index(self, state):
        return STATION_OFF


class ArrochPolicy(Policy):
    """Static always-on robot overlays (trajectory, avatar, ghost); no
    station marker is part of this baseline."""

    kind = "arroch"

    def act_robot_index(self, state, in_fov=True):
        return ROBOT_ALL_ON

    def act_station_index(self, state):
        return STATION_OFF


_CRMIAR_IN = RobotVizAction(False, False, True)
_CRMIAR_OUT = RobotVizAction(True, False, True)


class CrmiarPolicy(Policy):
    """Static trajectories plus a live-location marker only for robots
    outside the worker's view cone (standing in for off-screen pointers);
    no station marker."""

    kind = "crmiar"

    def act_robot_index(self, state, in_fov=True):
        return _CRMIAR_IN if in_fov else _CRMIAR_OUT

    def act_station_index(self, state):
        return STATION_OFF


class TabularMajorityPolicy(Policy):
    """Per-state, per-channel majority vote.  Untrained or unseen states
    fall back to all-on, matching the all-visualizations initialization."""

    kind = "tabular_majority"

    def __init__(self, robot_table: Optional[list[RobotVizAction]] = None,
                 station_table: Optional[list[StationVizAction]] = None,
                 version: int = 0):
        self._robot = robot_table if robot_table is not None \
            else [ROBOT_ALL_ON] * ft.N_ROBOT_STATES
        self._station = station_table if station_table is not None \
            else [STATION_ON] * ft.N_STATION_STATES
        self.version = version

    def act_robot_index(self, state, in_fov=True):
        return self._robot[state]

    def act_station_index(self, state):
        return self._station[state]

    def robot_table(self):
        return list(self._robot)

    def station_table(self):
        return list(self._station)


class LinearMulticlassPolicy(Policy):
    """One-vs-rest linear separators per channel over one-hot states.

    With a complete one-hot encoding each state owns its weight, so no bias
    term is needed and zero weights reproduce the all-on fallback (score 0
    maps to on).
    """

    kind = "linear_multiclass"

    def __init__(self, robot_weights: Optional[list[list[float]]] = None,
                 station_weights: Optional[list[float]] = None, version: int = 0):
        self.robot_weights = robot_weights if robot_weights is not None \
            else [[0.0] * ft.N_ROBOT_STATES for _ in ROBOT_CHANNELS]
        self.station_weights = station_weights if station_weights is not None \
            else [0.0] * ft.N_STATION_STATES
        self.version = version

    def act_robot_index(self, state, in_fov=True):
        w = self.robot_weights
        return robot_action_from_bits((int(w[0][state] >= 0.0),
                                       int(w[1][state] >= 0.0),
                                       int(w[2][state] >= 0.0)))

    def act_station_index(self, state):
        return STATION_ON if self.station_weights[state] >= 0.0 else STATION_OFF


_BUILTIN_KINDS = {
    "allon": AllOnPolicy,
    "noviz": NoVizPolicy,
    "arroch": ArrochPolicy,
    "crmiar": CrmiarPolicy,
}

LEARNABLE_KINDS = ("tabular_majority", "linear_multiclass")


def builtin_policy(kind: str) -> Policy:
    try:
        return _BUILTIN_KINDS[kind]()
    except KeyError:
        raise ValueError(f"unknown builtin policy kind: {kind!r}") from None


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

LINEAR_EPOCHS = 40


def _majority_tables(records) -> tuple[list[RobotVizAction], list[StationVizAction]]:
    # counts[state][channel] accumulates +1 for on, -1 for off
    robot_counts = [[0, 0, 0] for _ in range(ft.N_ROBOT_STATES)]
    robot_seen = [False] * ft.N_ROBOT_STATES
    station_counts = [0] * ft.N_STATION_STATES
    station_seen = [False] * ft.N_STATION_STATES
    for rec in records:
        if rec.agent_kind == "robot":
            row = robot_counts[rec.state]
            bits = rec.action_bits
            row[0] += 1 if bits[0] else -1
            row[1] += 1 if bits[1] else -1
            row[2] += 1 if bits[2] else -1
            robot_seen[rec.state] = True
        else:
            station_counts[rec.state] += 1 if rec.action_bits[0] else -1
            station_seen[rec.state] = True
    robot_table = []
    for s in range(ft.N_ROBOT_STATES):
        if not robot_seen[s]:
            robot_table.append(ROBOT_ALL_ON)
        else:
            row = robot_counts[s]
            # ties resolve to on: showing information is the fail-safe default
            robot_table.append(robot_action_from_bits((int(row[0] >= 0),
                                                       int(row[1] >= 0),
                                                       int(row[2] >= 0))))
    station_table = [
        STATION_ON if (not station_seen[s] or station_counts[s] >= 0) else STATION_OFF
        for s in range(ft.N_STATION_STATES)
    ]
    return robot_table, station_table


def _train_linear(records, epochs: int = LINEAR_EPOCHS
                  ) -> tuple[list[list[float]], list[float]]:
    robot_w = [[0.0] * ft.N_ROBOT_STATES for _ in ROBOT_CHANNELS]
    station_w = [0.0] * ft.N_STATION_STATES
    robot_samples = [(r.state, r.action_bits) for r in records if r.agent_kind == "robot"]
    station_samples = [(r.state, r.action_bits[0]) for r in records if r.agent_kind == "station"]
    for epoch in range(epochs):
        lr = 1.0 / (1.0 + epoch)
        for state, bits in robot_samples:
            for ch in range(3):
                y = 1.0 if bits[ch] else -1.0
                w = robot_w[ch]
                if y * w[state] < 1.0:
                    w[state] += lr * y
        for state, bit in station_samples:
            y = 1.0 if bit else -1.0
            if y * station_w[state] < 1.0:
                station_w[state] += lr * y
    return robot_w, station_w


def train(dataset, kind: str = "tabular_majority", version: int = 1) -> Policy:
    """Fit a policy of the given learnable kind on an aggregated dataset.

    Training is deterministic: records are consumed in dataset order, with
    a fixed epoch count and learning-rate schedule for the linear learner.
    """
    records = dataset.records if hasattr(dataset, "records") else list(dataset)
    if not records:
        raise TrainingError("cannot train on an empty dataset")
    if kind == "tabular_majority":
        robot_table, station_table = _majority_tables(records)
        return TabularMajorityPolicy(robot_table, station_table, version)
    if kind == "linear_multiclass":
        robot_w, station_w = _train_linear(records)
        return LinearMulticlassPolicy(robot_w, station_w, version)
    raise ValueError(f"unknown learnable policy kind: {kind!r}")
