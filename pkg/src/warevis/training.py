"""Iterative imitation learning for visualization policies.

The loop is classic dataset aggregation: roll the simulation out under a
stochastic mixture of expert and current ("novice") policy, capture every
agent's state together with the expert's label at fixed sim-time intervals,
fold the new pairs into one shared dataset, retrain, and swap the shared
policy in at the iteration boundary.  Training pools all agents' data into
a single classifier; execution queries it with one agent's own features.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

from . import features as ft
from .policy import (Policy, RobotVizAction, StationVizAction,
                     TabularMajorityPolicy, LinearMulticlassPolicy,
                     robot_action_from_bits, train, STATION_ON, STATION_OFF,
                     LEARNABLE_KINDS)
from .rng import Pcg32


@dataclass(frozen=True)
class Demonstration:
    """One (state, expert action) pair for one agent at one snapshot event."""
    iteration: int
    sim_time: float
    agent_kind: str  # "robot" | "station"
    agent_id: int
    state: int
    action_bits: tuple[int, ...]


class AggregatedDataset:
    """Append-only pool of demonstrations; nothing is ever relabeled."""

    __slots__ = ("records", "per_iteration_counts")

    def __init__(self, records=None):
        self.records: list[Demonstration] = []
        self.per_iteration_counts: dict[int, int] = {}
        if records:
            for r in records:
                self.append(r)

    def append(self, rec: Demonstration) -> None:
        self.records.append(rec)
        self.per_iteration_counts[rec.iteration] = \
            self.per_iteration_counts.get(rec.iteration, 0) + 1

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class TrainerParams:
    iterations: int = 240
    pairs_per_iteration: int = 25
    snapshot_interval: float = 4.0
    mix_schedule: str = "linear"      # "linear" | "exponential"
    mix_decay: float = 0.9            # base for the exponential schedule
    rng_seed: int = 0
    learner: str = "tabular_majority"
    checkpoint_every: int = 40
    expert_timeout: float = 300.0     # interactive source only

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.pairs_per_iteration < 1:
            raise ValueError("pairs_per_iteration must be >= 1")
        if self.snapshot_interval <= 0:
            raise ValueError("snapshot_interval must be positive")
        if self.mix_schedule not in ("linear", "exponential"):
            raise ValueError(f"unknown mix schedule {self.mix_schedule!r}")
        if self.learner not in LEARNABLE_KINDS:
            raise ValueError(f"unknown learner {self.learner!r}")


def mix_probability(iteration: int, params: TrainerParams) -> float:
    """Probability of executing the expert's action at this iteration.

    Starts at 1 and decays toward 0: linearly over the iteration budget, or
    geometrically for the exponential schedule.
    """
    if not 0 <= iteration < params.iterations:
        raise ValueError(f"iteration {iteration} outside [0, {params.iterations})")
    if params.mix_schedule == "linear":
        if params.iterations == 1:
            return 1.0
        return 1.0 - iteration / (params.iterations - 1)
    return params.mix_decay ** iteration


def mix_action(prob_expert: float, expert_action, novice_action, rng: Pcg32):
    """Bernoulli(prob_expert) pick between expert and novice action."""
    return expert_action if rng.random() < prob_expert else novice_action


# ---------------------------------------------------------------------------
# Expert sources
# ---------------------------------------------------------------------------

def default_robot_rule(state: int) -> RobotVizAction:
    """Reproducible stand-in for a human demonstrator (robot channels).

    Show the trajectory while a robot is delivering; show the live-location
    marker when it has been waiting a while or the worker is right next to
    it; show the motion ghost only in the mid-distance band when the local
    display is not already busy.
    """
    f = ft.decode_robot(state)
    trajectory = f.robot_task_state == "dropping"
    live = f.robot_waiting_time in ("medium", "long") or f.human_state == "close"
    ghost = f.human_state == "moderate" and f.nearby_robot_viz_status == "few"
    return robot_action_from_bits((int(live), int(ghost), int(trajectory)))


def default_station_rule(state: int) -> StationVizAction:
    """Balloon on when the station needs attention and the worker is not
    already there."""
    f = ft.decode_station(state)
    needs_help = (f.robots_waiting_time_ds in ("medium", "long")
                  or f.n_robots_at_drop_station == "many")
    return STATION_ON if needs_help and f.human_state != "close" else STATION_OFF


class ExpertSource:
    """Produces a full per-agent action labeling for observed states."""

    def robot_label(self, robot_id: int, state: int) -> RobotVizAction:
        raise NotImplementedError

    def station_label(self, station_id: int, state: int) -> StationVizAction:
        raise NotImplementedError

    def ready(self) -> bool:
        return True

    def on_snapshot_event(self, event_index: int) -> None:
        pass


class ScriptedExpert(ExpertSource):
    """Feature-rule oracle; the rules are precomputed into full tables."""

    def __init__(self, robot_rule: Callable[[int], RobotVizAction] = default_robot_rule,
                 station_rule: Callable[[int], StationVizAction] = default_station_rule):
        self.robot_table = [robot_rule(s) for s in range(ft.N_ROBOT_STATES)]
        self.station_table = [station_rule(s) for s in range(ft.N_STATION_STATES)]

    @classmethod
    def from_policy(cls, policy: Policy) -> "ScriptedExpert":
        return cls(policy.act_robot_index, policy.act_station_index)

    def robot_label(self, robot_id, state):
        return self.robot_table[state]

    def station_label(self, station_id, state):
        return self.station_table[state]


class InteractiveExpert(ExpertSource):
    """Sticky checkbox state driven by inbound commands.

    Each agent-channel holds its last commanded value (initially all-on, so
    the demonstrator starts from full visibility); at every snapshot event
    the current checkbox state is the label.
    """

    def __init__(self, robot_ids, station_ids):
        self.robot_boxes: dict[int, list[bool]] = {i: [True, True, True] for i in robot_ids}
        self.station_boxes: dict[int, bool] = {i: True for i in station_ids}
        self.connected = False

    def set_channel(self, agent_kind: str, agent_id: int, channel: str, on: bool) -> None:
        if agent_kind == "robot":
            boxes = self.robot_boxes.get(agent_id)
            if boxes is None:
                raise ft.UnknownAgentError(f"unknown robot id {agent_id}")
            from .policy import ROBOT_CHANNELS
            try:
                boxes[ROBOT_CHANNELS.index(channel)] = on
            except ValueError:
                raise ValueError(f"unknown robot channel {channel!r}") from None
        elif agent_kind == "station":
            if agent_id not in self.station_boxes:
                raise ft.UnknownAgentError(f"unknown station id {agent_id}")
            if channel != "balloon":
                raise ValueError(f"unknown station channel {channel!r}")
            self.station_boxes[agent_id] = on
        else:
            raise ValueError(f"unknown agent kind {agent_kind!r}")

    def robot_label(self, robot_id, state):
        return robot_action_from_bits([int(b) for b in self.robot_boxes[robot_id]])

    def station_label(self, station_id, state):
        return StationVizAction(self.station_boxes[station_id])

    def ready(self) -> bool:
        return self.connected


class ReplayExpert(ExpertSource):
    """Replays labels from a previously exported dataset, event by event."""

    def __init__(self, records):
        self._events: list[dict[tuple[str, int], tuple[int, ...]]] = []
        current: dict[tuple[str, int], tuple[int, ...]] = {}
        last_time: Optional[float] = None
        for rec in records:
            if last_time is not None and rec.sim_time != last_time:
                self._events.append(current)
                current = {}
            current[(rec.agent_kind, rec.agent_id)] = rec.action_bits
            last_time = rec.sim_time
        if current:
            self._events.append(current)
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._events)

    def on_snapshot_event(self, event_index: int) -> None:
        self._cursor = event_index

    def _lookup(self, kind: str, agent_id: int):
        if self._cursor >= len(self._events):
            raise TrainingAborted(
                f"replay log exhausted at event {self._cursor} "
                f"(log holds {len(self._events)} events)")
        try:
            return self._events[self._cursor][(kind, agent_id)]
        except KeyError:
            raise TrainingAborted(
                f"replay log has no label for {kind} {agent_id} "
                f"at event {self._cursor}") from None

    def robot_label(self, robot_id, state):
        return robot_action_from_bits(self._lookup("robot", robot_id))

    def station_label(self, station_id, state):
        return StationVizAction(bool(self._lookup("station", station_id)[0]))


class TrainingAborted(Exception):
    pass


# ---------------------------------------------------------------------------
# Mixed execution policy
# ---------------------------------------------------------------------------

class MixedPolicyProvider:
    """Per-query Bernoulli mixture of expert and novice actions.

    Draws consume the trainer's seeded stream; the engine queries agents in
    ascending id order every tick, which pins the stream layout.
    """

    def __init__(self, expert: ExpertSource, novice: Policy, prob_expert: float,
                 rng: Pcg32):
        self.expert = expert
        self.novice = novice
        self.prob_expert = prob_expert
        self.rng = rng

    def robot_action(self, robot_id: int, state: int, in_fov: bool) -> RobotVizAction:
        expert_a = self.expert.robot_label(robot_id, state)
        novice_a = self.novice.act_robot_index(state, in_fov)
        return mix_action(self.prob_expert, expert_a, novice_a, self.rng)

    def station_action(self, station_id: int, state: int) -> StationVizAction:
        expert_a = self.expert.station_label(station_id, state)
        novice_a = self.novice.act_station_index(state)
        return mix_action(self.prob_expert, expert_a, novice_a, self.rng)


# ---------------------------------------------------------------------------
# Discrepancy metric
# ---------------------------------------------------------------------------

def action_discrepancy(policy_bits, expert_bits) -> tuple[int, int]:
    disable = 0
    mismatch = 0
    for p, e in zip(policy_bits, expert_bits):
        if p != e:
            mismatch += 1
            if p and not e:
                disable += 1
    return disable, mismatch


def count_discrepancies(policy: Policy, expert: ExpertSource, states) -> tuple[int, int]:
    """Count (disable, total) mismatches between a policy and the expert.

    `states` is an iterable of (agent_kind, agent_id, state, in_fov).  A
    disable discrepancy is a channel the policy enables but the expert turns
    off; the total also counts channels the expert enables that the policy
    does not.
    """
    disable = 0
    mismatch = 0
    for kind, agent_id, state, in_fov in states:
        if kind == "robot":
            p = policy.act_robot_index(state, in_fov).bits()
            e = expert.robot_label(agent_id, state).bits()
        else:
            p = policy.act_station_index(state).bits()
            e = expert.station_label(agent_id, state).bits()
        d, m = action_discrepancy(p, e)
        disable += d
        mismatch += m
    return disable, mismatch


# ---------------------------------------------------------------------------
# The training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainingResult:
    policy: Policy
    disable_curve: list[int]
    mismatch_curve: list[int]
    dataset_sizes: list[int]
    mix_curve: list[float]
    baseline_curves: dict[str, list[int]]
    checkpoints: list[tuple[int, Policy]]
    snapshot_events: int
    trials_run: int


def _initial_policy(learner: str) -> Policy:
    if learner == "tabular_majority":
        return TabularMajorityPolicy()
    return LinearMulticlassPolicy()


def run_imitation(trial_factory, expert: ExpertSource, dataset: AggregatedDataset,
                  params: TrainerParams,
                  baselines: Optional[dict[str, Policy]] = None,
                  tick_hook: Optional[Callable] = None,
                  on_iteration: Optional[Callable] = None) -> TrainingResult:
    """Run the full iterative training loop.

    trial_factory(trial_index, provider) must return a fresh Simulation
    driven by the given action provider; trials are chained back-to-back so
    that snapshot events stay on an exact snapshot_interval grid of the
    global training clock.  Returns the final policy plus per-iteration
    discrepancy, mixing, and dataset-size curves.  tick_hook(sim) runs after
    every tick (pacing, bridges); on_iteration(j, mix, size, disable) after
    every retrain.
    """
    baselines = baselines or {}
    rng = Pcg32(params.rng_seed)
    novice = _initial_policy(params.learner)
    provider = MixedPolicyProvider(expert, novice, 1.0, rng)
    sim = trial_factory(0, provider)
    dt = sim.world.config.tick_duration
    ticks_per_event = round(params.snapshot_interval / dt)
    if abs(ticks_per_event * dt - params.snapshot_interval) > 1e-9 or ticks_per_event < 1:
        raise ValueError("snapshot_interval must be a whole number of ticks")

    disable_curve: list[int] = []
    mismatch_curve: list[int] = []
    dataset_sizes: list[int] = []
    mix_curve: list[float] = []
    baseline_curves: dict[str, list[int]] = {name: [] for name in baselines}
    checkpoints: list[tuple[int, Policy]] = []

    global_tick = 0
    event_index = 0
    trials_run = 1

    for j in range(params.iterations):
        prob = mix_probability(j, params)
        provider.prob_expert = prob
        provider.novice = novice
        if params.checkpoint_every > 0 and j % params.checkpoint_every == 0:
            checkpoints.append((j, novice))
        disable_j = 0
        mismatch_j = 0
        baseline_j = {name: 0 for name in baselines}
        events_this_iter = 0

        while events_this_iter < params.pairs_per_iteration:
            if sim.complete or sim.timed_out:
                sim = trial_factory(trials_run, provider)
                trials_run += 1
                if sim.complete:
                    raise ValueError(
                        "cannot train on a scenario whose trials are born complete")
            sim.tick_once()
            if tick_hook is not None:
                tick_hook(sim)
            global_tick += 1
            if global_tick % ticks_per_event != 0:
                continue

            # Snapshot event: capture every agent's state with the expert label.
            if not expert.ready():
                _wait_for_expert(expert, params.expert_timeout)
            expert.on_snapshot_event(event_index)
            event_time = (event_index + 1) * params.snapshot_interval
            for i, robot in enumerate(sim.world.robots):
                state = sim.last_robot_states[i]
                in_fov = sim.last_robot_in_fov[i]
                e_bits = expert.robot_label(robot.id, state).bits()
                dataset.append(Demonstration(j, event_time, "robot", robot.id,
                                             state, e_bits))
                n_bits = novice.act_robot_index(state, in_fov).bits()
                d, m = action_discrepancy(n_bits, e_bits)
                disable_j += d
                mismatch_j += m
                for name, pol in baselines.items():
                    b_bits = pol.act_robot_index(state, in_fov).bits()
                    baseline_j[name] += action_discrepancy(b_bits, e_bits)[0]
            for k, station in enumerate(sim.world.stations):
                state = sim.last_station_states[k]
                e_bits = expert.station_label(station.id, state).bits()
                dataset.append(Demonstration(j, event_time, "station", station.id,
                                             state, e_bits))
                n_bits = novice.act_station_index(state).bits()
                d, m = action_discrepancy(n_bits, e_bits)
                disable_j += d
                mismatch_j += m
                for name, pol in baselines.items():
                    b_bits = pol.act_station_index(state).bits()
                    baseline_j[name] += action_discrepancy(b_bits, e_bits)[0]
            event_index += 1
            events_this_iter += 1

        novice = train(dataset, params.learner, version=j + 1)
        provider.novice = novice
        disable_curve.append(disable_j)
        mismatch_curve.append(mismatch_j)
        dataset_sizes.append(len(dataset))
        mix_curve.append(prob)
        for name in baselines:
            baseline_curves[name].append(baseline_j[name])
        if on_iteration is not None:
            on_iteration(j, prob, len(dataset), disable_j)

    return TrainingResult(novice, disable_curve, mismatch_curve, dataset_sizes,
                          mix_curve, baseline_curves, checkpoints,
                          event_index, trials_run)


def _wait_for_expert(expert: ExpertSource, timeout: float) -> None:
    """Block (wall clock) until an interactive expert is available."""
    deadline = time.monotonic() + timeout
    while not expert.ready():
        if time.monotonic() >= deadline:
            raise TrainingAborted(
                f"expert source unavailable for {timeout:.0f}s at a pending snapshot")
        time.sleep(0.05)
