import dataclasses
import math

import pytest

from conftest import micro_config
from warevis.configs import mini_config
from warevis.engine import (IDLE_SCAN_RATE, Simulation, SimulationComplete,
                            TrialTimeout, WorkerParams, in_view_cone,
                            line_of_sight, run_trial, visible_element_count,
                            worker_decide)
from warevis.features import DiscretizationThresholds
from warevis.geom import Pose
from warevis.policy import builtin_policy
from warevis.world import RobotStatus, build_world, snapshot


def tick_until(sim, predicate, limit=40000):
    for _ in range(limit):
        if predicate():
            return True
        if sim.complete or sim.timed_out:
            return predicate()
        sim.tick_once()
    return predicate()


# -- unload radius -------------------------------------------------------------

def _waiting_setup(seed=0):
    """One robot waiting at the station; the teleop worker parked far away."""
    cfg = micro_config(n_robots=1, seed=seed, worker_start_cell=(16, 8))
    world = build_world(cfg)
    # teleop kind: the worker holds still and has no decision latency
    sim = Simulation(world, builtin_policy("noviz"), WorkerParams(kind="teleop"))
    assert tick_until(sim, lambda: world.robots[0].status is RobotStatus.WAITING)
    return cfg, world, sim


def _park_worker_at(world, dx):
    """Place the worker dx meters east of the waiting robot."""
    robot = world.robots[0]
    world.worker.pose = Pose(robot.pose.x + dx, robot.pose.y, math.pi)


def test_unload_within_radius():
    cfg, world, sim = _waiting_setup()
    robot = world.robots[0]
    before = robot.remaining_tasks
    _park_worker_at(world, 0.9)
    sim.tick_once()
    assert sim.boxes_delivered == 1
    assert robot.remaining_tasks == before - 1
    assert robot.status in (RobotStatus.TO_SHELF, RobotStatus.RETURNING)


def test_no_unload_outside_radius():
    cfg, world, sim = _waiting_setup()
    _park_worker_at(world, 1.1)
    for _ in range(50):
        sim.tick_once()
    assert sim.boxes_delivered == 0
    assert world.robots[0].status is RobotStatus.WAITING


def test_unload_blocked_while_worker_busy():
    cfg, world, sim = _waiting_setup()
    _park_worker_at(world, 0.9)
    world.worker.busy_until = world.sim_time + 5.0
    sim.tick_once()
    assert sim.boxes_delivered == 0
    for _ in range(60):
        sim.tick_once()
    assert sim.boxes_delivered == 1


def test_step_refuses_after_completion():
    cfg = micro_config(n_robots=0)
    sim = Simulation(build_world(cfg), builtin_policy("allon"))
    assert sim.complete
    with pytest.raises(SimulationComplete):
        sim.step()


def test_step_rejects_foreign_dt():
    world = build_world(micro_config(n_robots=1))
    sim = Simulation(world, builtin_policy("allon"))
    with pytest.raises(ValueError):
        sim.step(dt=0.25)
    snap = sim.step(dt=0.1)
    assert snap.sim_time == pytest.approx(0.1)


# -- geometry helpers ----------------------------------------------------------

def test_view_cone():
    # worker at origin facing +x with 60 deg half angle, 10m range
    assert in_view_cone(0, 0, 0.0, math.pi / 3, 10.0, 5.0, 0.0)
    assert in_view_cone(0, 0, 0.0, math.pi / 3, 10.0, 3.0, 3.0)      # 45 deg
    assert not in_view_cone(0, 0, 0.0, math.pi / 3, 10.0, -5.0, 0.0)  # behind
    assert not in_view_cone(0, 0, 0.0, math.pi / 3, 10.0, 11.0, 0.0)  # too far
    assert in_view_cone(0, 0, 0.0, math.pi / 3, 10.0, 0.0, 0.0)       # on top


def test_line_of_sight_blocked_by_shelves():
    world = build_world(mini_config())
    grid = world.grid
    # straight row crossing the middle rack (row 12, cols 8..13)
    assert not line_of_sight(grid, (10, 10), (10, 14))
    # a clear column away from racks
    assert line_of_sight(grid, (20, 10), (20, 14))
    assert line_of_sight(grid, (5, 5), (5, 5))


# -- scripted worker -----------------------------------------------------------

def _walled_closet_config(time_cap):
    """A shelf wall hides the station in a west closet; the only opening is a
    south corridor the worker never wanders into.  Robots path through it."""
    wall = tuple((6, r) for r in range(1, 10))
    return micro_config(
        n_robots=1, shelf_cells=wall, drop_stations=((0, (3, 3)),),
        home_cells=((16, 3),), worker_start_cell=(16, 6),
        time_cap=time_cap)


def test_information_starvation_behind_shelves():
    """No overlays, waiting robot behind a shelf wall outside sight: the
    station never enters the worker's knowledge and nothing is delivered."""
    cfg = _walled_closet_config(time_cap=120.0)
    world = build_world(cfg)
    sim = Simulation(world, builtin_policy("noviz"))
    with pytest.raises(TrialTimeout) as err:
        run_trial(cfg, builtin_policy("noviz"))
    assert err.value.metrics.boxes_delivered == 0
    # and directly: knowledge stays empty
    while not sim.timed_out:
        sim.tick_once()
    assert sim.knowledge == set()


def test_balloon_reveals_station_through_walls():
    metrics = run_trial(_walled_closet_config(time_cap=600.0),
                        builtin_policy("allon"))
    assert metrics.boxes_delivered == 3


def test_worker_targets_only_announced_station():
    world = build_world(mini_config(3))
    sim = Simulation(world, builtin_policy("allon"))
    assert tick_until(sim, lambda: sim.worker_target is not None)
    waiting = world.waiting_ids_by_station()
    assert waiting[sim.worker_target], "target has no waiting robot"
    assert sim.worker_target in sim.knowledge


def test_decision_latency_grows_with_clutter():
    """Identical placement, more enabled elements -> strictly longer latency."""
    params = WorkerParams()
    world = build_world(mini_config(5))
    sim_on = Simulation(world, builtin_policy("allon"))
    tick_until(sim_on, lambda: sim_on.worker_target is not None)
    snap_on = snapshot(world)

    poses = {r.id: r.pose for r in snap_on.robots}
    positions = {s.id: s.position for s in snap_on.stations}
    w = snap_on.worker
    elements_on = visible_element_count(snap_on.frame, poses, positions,
                                        w.pose.x, w.pose.y, w.pose.heading,
                                        w.fov_half_angle, w.sight_range)
    # strip the frame down to a single channel and recount
    lean_frame = snap_on.frame.__class__(
        {rid: dataclasses.replace(o, action=dataclasses.replace(
            o.action, transparent_avatar=False, live_location=False))
         for rid, o in snap_on.frame.robots.items()},
        {sid: False for sid in snap_on.frame.stations})
    elements_lean = visible_element_count(lean_frame, poses, positions,
                                          w.pose.x, w.pose.y, w.pose.heading,
                                          w.fov_half_angle, w.sight_range)
    assert elements_lean < elements_on
    latency_on = params.decision_latency + params.latency_per_element * elements_on
    latency_lean = params.decision_latency + params.latency_per_element * elements_lean
    assert latency_lean < latency_on


def test_worker_decide_on_snapshot():
    world = build_world(mini_config(3))
    sim = Simulation(world, builtin_policy("allon"))
    tick_until(sim, lambda: any(r.status is RobotStatus.WAITING
                                for r in world.robots))
    snap = snapshot(world)
    knowledge = set()
    cmd = worker_decide(WorkerParams(), knowledge, snap)
    assert cmd.kind == "target"
    assert cmd.latency >= WorkerParams().decision_latency
    waiting = {s.id for s in snap.stations if s.waiting_robot_ids}
    assert cmd.station_id in waiting


def test_worker_decide_wanders_without_information():
    world = build_world(mini_config(3))
    sim = Simulation(world, builtin_policy("noviz"))
    sim.tick_once()
    snap = snapshot(world)
    cmd = worker_decide(WorkerParams(), set(), snap)
    assert cmd.kind == "wander"


def test_idle_worker_scans():
    cfg = micro_config(n_robots=0)
    world = build_world(cfg)
    sim = Simulation(world, builtin_policy("noviz"))
    # force-tick the worker logic by hand: a 0-robot world is born complete,
    # so drive the scripted worker directly
    h0 = world.worker.pose.heading
    sim._worker_scripted(0.0, 0.1)
    sim._worker_scripted(0.1, 0.1)
    # worker first walks toward the center; once there it rotates in place
    for _ in range(2000):
        sim._worker_scripted(0.0, 0.1)
    h1 = world.worker.pose.heading
    sim._worker_scripted(0.0, 0.1)
    assert world.worker.pose.heading != h1 or h1 != h0


# -- run_trial ------------------------------------------------------------------

def test_zero_robots_trivial_trial():
    metrics = run_trial(micro_config(n_robots=0), builtin_policy("allon"))
    assert metrics.completion_time == 0.0
    assert metrics.total_wait == 0.0
    assert metrics.boxes_delivered == 0


def test_trial_determinism():
    cfg = mini_config()
    a = run_trial(cfg, builtin_policy("allon"), seed=77)
    b = run_trial(cfg, builtin_policy("allon"), seed=77)
    assert a == b


def test_trial_seeds_differ():
    cfg = mini_config()
    a = run_trial(cfg, builtin_policy("allon"), seed=1)
    b = run_trial(cfg, builtin_policy("allon"), seed=2)
    assert a != b


def test_micro_world_wait_matches_kinematics_oracle():
    """Single robot, single station, straight runs: the first wait interval
    is predictable from distances and speeds alone.

    Layout (cells, 0.5 m): home (16,3) -> shelf neighbor of (10,5) -> station
    (3,3).  The worker stands one cell from the station, latency-free, so the
    robot's first wait is (worker trivially close) ~ 0 and total wait reduces
    to the queuing caused by robot travel; we check the round-trip timing
    instead: delivery k happens near t_k = t_arrival + k * round_trip.
    """
    cfg = micro_config(n_robots=1, seed=3, worker_start_cell=(16, 8))
    world = build_world(cfg)
    sim = Simulation(world, builtin_policy("noviz"), WorkerParams(kind="teleop"))
    robot = world.robots[0]
    task = robot.current_task
    # oracle: recompute both legs with an independent shortest-path search
    from conftest import dijkstra_cost
    from warevis.planner import COST_SCALE
    grid = world.grid
    shelf_goal = sim._shelf_goal(task.shelf_cell)
    leg1 = dijkstra_cost(grid, (16, 3), shelf_goal) * 0.5 / COST_SCALE
    leg2 = dijkstra_cost(grid, shelf_goal, (3, 3)) * 0.5 / COST_SCALE
    expected_arrival = (leg1 + leg2) / cfg.robot_speed
    assert tick_until(sim, lambda: robot.status is RobotStatus.WAITING)
    arrival = world.sim_time
    # the oracle is continuous; the engine pays a tick of arrival detection
    # per leg plus clamped leg-end fractions, bounded well under a second
    assert arrival == pytest.approx(expected_arrival, abs=1.0)
    assert arrival >= expected_arrival
    # let the robot wait a known interval, then step within unload range
    for _ in range(50):
        sim.tick_once()
    _park_worker_at(world, 0.9)
    sim.tick_once()
    assert sim.boxes_delivered == 1
    expected_wait = sim.unload_events[0].sim_time - arrival
    assert sim.per_robot_wait[0] == pytest.approx(expected_wait, abs=0.2)
    assert sim.per_robot_wait[0] == pytest.approx(5.1, abs=0.2)


def test_total_wait_equals_sum_of_unload_intervals():
    cfg = mini_config()
    world = build_world(cfg)
    sim = Simulation(world, builtin_policy("allon"))
    while not sim.complete and not sim.timed_out:
        sim.tick_once()
    metrics = sim.metrics()
    assert metrics.total_wait == pytest.approx(
        sum(e.wait for e in sim.unload_events))
    assert metrics.total_wait == pytest.approx(sum(metrics.per_robot_wait))
    assert metrics.boxes_delivered == cfg.n_robots * cfg.boxes_per_robot


def test_completion_implies_pool_empty_and_everyone_home():
    cfg = mini_config()
    world = build_world(cfg)
    sim = Simulation(world, builtin_policy("allon"))
    while not sim.complete:
        sim.tick_once()
    assert len(world.pool) == 0
    for r in world.robots:
        assert r.status is RobotStatus.DONE
        assert r.cell == r.home_cell


def test_timeout_carries_partial_metrics():
    cfg = _walled_closet_config(time_cap=90.0)
    with pytest.raises(TrialTimeout) as err:
        run_trial(cfg, builtin_policy("noviz"))
    m = err.value.metrics
    assert m.timed_out
    assert m.completion_time == pytest.approx(90.0, abs=0.2)
    assert m.total_wait > 0.0  # the stranded robot's accrued wait counts


def test_no_two_robots_share_a_cell_every_tick():
    cfg = mini_config(8)
    world = build_world(cfg)
    sim = Simulation(world, builtin_policy("allon"))
    while not sim.complete and not sim.timed_out:
        sim.tick_once()
        cells = [r.cell for r in world.robots]
        assert len(set(cells)) == len(cells)
    assert sim.complete
