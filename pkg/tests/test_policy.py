import random
import time

import pytest

import warevis.features as ft
from warevis.configs import mini_config
from warevis.engine import Simulation
from warevis.planner import GridMap, plan_cells, trajectory_from_cells
from warevis.policy import (ROBOT_ALL_OFF, ROBOT_ALL_ON, STATION_OFF, STATION_ON,
                            AllOnPolicy, ArrochPolicy, CrmiarPolicy,
                            LinearMulticlassPolicy, NoVizPolicy, Policy,
                            RobotVizAction, StationVizAction,
                            TabularMajorityPolicy, TrainingError, WIDTH_BASE,
                            builtin_policy, render_frame, robot_action_from_bits,
                            robot_color, train, trajectory_polyline)
from warevis.training import AggregatedDataset, Demonstration
from warevis.world import build_world, snapshot


def rec(kind, state, bits, agent_id=0, j=0, t=0.0):
    return Demonstration(j, t, kind, agent_id, state, tuple(bits))


def dataset_of(records):
    return AggregatedDataset(records)


# -- static baselines ---------------------------------------------------------

def test_arroch_is_all_on_for_any_features():
    pol = builtin_policy("arroch")
    for s in range(ft.N_ROBOT_STATES):
        assert pol.act_robot_index(s) == ROBOT_ALL_ON
        assert pol.act_robot_index(s, in_fov=False) == ROBOT_ALL_ON


def test_allon_and_noviz_station():
    assert builtin_policy("allon").act_station_index(0) == STATION_ON
    assert builtin_policy("noviz").act_station_index(0) == STATION_OFF


def test_arroch_station_has_no_balloon():
    # the always-on baseline defines no station marker
    pol = builtin_policy("arroch")
    for s in range(ft.N_STATION_STATES):
        assert pol.act_station_index(s) == STATION_OFF
    for s in range(ft.N_STATION_STATES):
        assert builtin_policy("crmiar").act_station_index(s) == STATION_OFF


def test_crmiar_live_location_tracks_view_cone():
    pol = builtin_policy("crmiar")
    for s in range(ft.N_ROBOT_STATES):
        inside = pol.act_robot_index(s, in_fov=True)
        outside = pol.act_robot_index(s, in_fov=False)
        assert inside.trajectory and outside.trajectory
        assert not inside.transparent_avatar and not outside.transparent_avatar
        assert not inside.live_location
        assert outside.live_location


def test_static_kinds_are_feature_invariant():
    for kind in ("allon", "noviz", "arroch"):
        pol = builtin_policy(kind)
        actions = {pol.act_robot_index(s) for s in range(ft.N_ROBOT_STATES)}
        assert len(actions) == 1
        stations = {pol.act_station_index(s) for s in range(ft.N_STATION_STATES)}
        assert len(stations) == 1


def test_every_kind_is_total_over_both_state_spaces():
    policies = [builtin_policy(k) for k in ("allon", "noviz", "arroch", "crmiar")]
    policies.append(TabularMajorityPolicy())
    policies.append(LinearMulticlassPolicy())
    for pol in policies:
        for s in range(ft.N_ROBOT_STATES):
            assert isinstance(pol.act_robot_index(s, True), RobotVizAction)
            assert isinstance(pol.act_robot_index(s, False), RobotVizAction)
        for s in range(ft.N_STATION_STATES):
            assert isinstance(pol.act_station_index(s), StationVizAction)


def test_unknown_builtin_kind():
    with pytest.raises(ValueError):
        builtin_policy("mystery")


# -- learnable policies -------------------------------------------------------

def test_untrained_tabular_falls_back_to_all_on():
    pol = TabularMajorityPolicy()
    for s in (0, 77, 143):
        assert pol.act_robot_index(s) == ROBOT_ALL_ON
    for s in (0, 17):
        assert pol.act_station_index(s) == STATION_ON


def test_untrained_linear_falls_back_to_all_on():
    pol = LinearMulticlassPolicy()
    assert all(pol.act_robot_index(s) == ROBOT_ALL_ON
               for s in range(ft.N_ROBOT_STATES))


def test_single_pair_table():
    d = dataset_of([rec("robot", 5, (0, 0, 0))])
    pol = train(d, "tabular_majority")
    assert pol.act_robot_index(5) == ROBOT_ALL_OFF
    assert pol.act_robot_index(6) == ROBOT_ALL_ON  # unseen stays on


def test_majority_tie_breaks_to_on():
    d = dataset_of([
        rec("robot", 9, (1, 0, 0)), rec("robot", 9, (1, 0, 0)),
        rec("robot", 9, (0, 1, 1)), rec("robot", 9, (0, 1, 1)),
    ])
    pol = train(d, "tabular_majority")
    # every channel is split 2/2 -> all on
    assert pol.act_robot_index(9) == ROBOT_ALL_ON


def test_station_majority_two_on_one_off():
    d = dataset_of([
        rec("station", 3, (1,)), rec("station", 3, (1,)), rec("station", 3, (0,)),
    ])
    pol = train(d, "tabular_majority")
    assert pol.act_station_index(3) == STATION_ON


def test_train_empty_dataset_raises():
    with pytest.raises(TrainingError):
        train(dataset_of([]), "tabular_majority")


def test_realizable_dataset_reproduced_exactly():
    rng = random.Random(3)
    labels = {s: tuple(rng.randint(0, 1) for _ in range(3))
              for s in range(ft.N_ROBOT_STATES)}
    station_labels = {s: (rng.randint(0, 1),) for s in range(ft.N_STATION_STATES)}
    records = []
    for s, bits in labels.items():
        for _ in range(rng.randint(1, 4)):
            records.append(rec("robot", s, bits))
    for s, bits in station_labels.items():
        records.append(rec("station", s, bits))
    for kind in ("tabular_majority", "linear_multiclass"):
        pol = train(dataset_of(records), kind)
        for s, bits in labels.items():
            assert pol.act_robot_index(s).bits() == bits, (kind, s)
        for s, bits in station_labels.items():
            assert pol.act_station_index(s).bits() == bits, (kind, s)


def brute_force_majority(records):
    """Independent per-state per-channel frequency counter."""
    from collections import defaultdict
    robot_votes = defaultdict(lambda: [[0, 0], [0, 0], [0, 0]])
    station_votes = defaultdict(lambda: [0, 0])
    for r in records:
        if r.agent_kind == "robot":
            for ch in range(3):
                robot_votes[r.state][ch][r.action_bits[ch]] += 1
        else:
            station_votes[r.state][r.action_bits[0]] += 1
    robot_out = {}
    for s, votes in robot_votes.items():
        robot_out[s] = tuple(1 if votes[ch][1] >= votes[ch][0] else 0
                             for ch in range(3))
    station_out = {s: (1 if v[1] >= v[0] else 0,) for s, v in station_votes.items()}
    return robot_out, station_out


def test_tabular_equals_brute_force_on_random_datasets():
    rng = random.Random(99)
    for trial in range(100):
        n = rng.randint(1, 400)
        records = []
        for _ in range(n):
            if rng.random() < 0.7:
                records.append(rec("robot", rng.randrange(ft.N_ROBOT_STATES),
                                   tuple(rng.randint(0, 1) for _ in range(3))))
            else:
                records.append(rec("station", rng.randrange(ft.N_STATION_STATES),
                                   (rng.randint(0, 1),)))
        pol = train(dataset_of(records), "tabular_majority")
        robot_exp, station_exp = brute_force_majority(records)
        for s, bits in robot_exp.items():
            assert pol.act_robot_index(s).bits() == bits, (trial, s)
        for s, bits in station_exp.items():
            assert pol.act_station_index(s).bits() == bits, (trial, s)


def test_linear_reaches_full_training_accuracy_on_realizable_targets():
    rng = random.Random(17)
    labels = {s: tuple(rng.randint(0, 1) for _ in range(3))
              for s in range(ft.N_ROBOT_STATES)}
    records = [rec("robot", s, bits) for s, bits in labels.items() for _ in range(3)]
    records.append(rec("station", 0, (1,)))
    pol = train(dataset_of(records), "linear_multiclass")
    correct = sum(pol.act_robot_index(s).bits() == bits for s, bits in labels.items())
    assert correct == ft.N_ROBOT_STATES


def test_training_speed_at_full_dataset_scale():
    rng = random.Random(1)
    records = [rec("robot", rng.randrange(ft.N_ROBOT_STATES),
                   tuple(rng.randint(0, 1) for _ in range(3)))
               for _ in range(6000)]
    t0 = time.monotonic()
    train(dataset_of(records), "tabular_majority")
    assert time.monotonic() - t0 < 1.0


# -- frame rendering ----------------------------------------------------------

def _grid():
    blocked = {(c, 0) for c in range(12)} | {(c, 11) for c in range(12)} \
        | {(0, r) for r in range(12)} | {(11, r) for r in range(12)}
    return GridMap(0.5, 12, 12, frozenset(blocked))


def test_polyline_width_rule():
    grid = _grid()
    cells, cost = plan_cells(grid, (1, 1), (9, 1))
    traj = trajectory_from_cells(grid, cells, cost)
    polyline = trajectory_polyline(traj)
    widths = [w for _, _, w in polyline]
    # widest at the start, narrowing monotonically to the base width at the goal
    assert widths[0] == max(widths)
    assert widths[-1] == pytest.approx(WIDTH_BASE)
    assert all(a >= b for a, b in zip(widths, widths[1:]))


def test_polyline_zero_length_trajectory():
    grid = _grid()
    cells, cost = plan_cells(grid, (1, 1), (1, 1))
    traj = trajectory_from_cells(grid, cells, cost)
    polyline = trajectory_polyline(traj)
    assert len(polyline) == 1
    assert polyline[0][2] == pytest.approx(WIDTH_BASE)


def test_mid_route_width_smaller_near_robot_than_near_start():
    grid = _grid()
    cells, cost = plan_cells(grid, (1, 1), (9, 1))
    traj = trajectory_from_cells(grid, cells, cost)
    traj.progress = traj.total_length / 2
    polyline = trajectory_polyline(traj)
    robot_vertex = min(range(len(polyline)),
                       key=lambda i: abs(traj.cumulative[i] - traj.progress))
    assert polyline[robot_vertex][2] < polyline[0][2]


def test_render_frame_all_off():
    world = build_world(mini_config(2))
    sim = Simulation(world, builtin_policy("noviz"))
    sim.tick_once()
    snap = snapshot(world)
    assert snap.frame.enabled_channel_count() == 0


def test_render_frame_covers_every_agent():
    world = build_world(mini_config(2))
    sim = Simulation(world, builtin_policy("allon"))
    sim.tick_once()
    snap = snapshot(world)
    assert set(snap.frame.robots) == {r.id for r in snap.robots}
    assert set(snap.frame.stations) == {s.id for s in snap.stations}
    actions = {rid: o.action for rid, o in snap.frame.robots.items()}
    frame2 = render_frame(snap, actions,
                          {sid: StationVizAction(on)
                           for sid, on in snap.frame.stations.items()})
    assert frame2.enabled_channel_count() == snap.frame.enabled_channel_count()


def test_avatar_phase_advances_and_wraps():
    world = build_world(mini_config(2))
    sim = Simulation(world, builtin_policy("allon"))
    phases = []
    for _ in range(150):
        sim.tick_once()
        phases.append(next(iter(snapshot(world).frame.robots.values())).avatar_phase)
    assert all(0.0 <= p < 1.0 for p in phases)
    assert phases[1] > phases[0]
    assert any(b < a for a, b in zip(phases, phases[1:])), "no wrap observed"


def test_robot_colors_distinct():
    colors = {robot_color(i) for i in range(15)}
    assert len(colors) == 15
