"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a single ACCEPTANCE line so the run doubles as a report:

    pytest tests/test_acceptance.py -v -s
"""

import math
import os
import random
import time

import pytest

import warevis.formats as formats
from conftest import dijkstra_cost, random_grid
from warevis.cli import main
from warevis.configs import main_config, mini_config
from warevis.engine import TrialTimeout, WorkerParams, run_trial
from warevis.features import (DiscretizationThresholds, N_ROBOT_STATES,
                              N_STATION_STATES)
from warevis.planner import NoPathError, plan_cells
from warevis.policy import TabularMajorityPolicy, builtin_policy, train
from warevis.rng import Pcg32
from warevis.server import Bridge, replay_command_log
from warevis.stats import least_squares_slope, mean, sign_test
from warevis.training import (AggregatedDataset, Demonstration, ScriptedExpert,
                              TrainerParams, mix_action, mix_probability)

REPORT: list[str] = []


def report(name: str, ok: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    REPORT.append(line)
    print("\n" + line)
    assert ok, line


@pytest.fixture(scope="session")
def default_training_run(tmp_path_factory):
    """One full training run with all defaults (12-robot floor, 240
    iterations, 25 snapshot events per iteration), via the CLI."""
    out = str(tmp_path_factory.mktemp("train-defaults"))
    t0 = time.monotonic()
    rc = main(["train", "--out", out])
    elapsed = time.monotonic() - t0
    assert rc == 0
    return out, elapsed


def _run_many(config, policy, seeds, time_cap=None):
    waits = []
    for seed in seeds:
        try:
            m = run_trial(config, policy, seed=seed, time_cap=time_cap)
        except TrialTimeout as e:
            m = e.metrics
        waits.append(m.total_wait)
    return waits


# -- 1. dataset cardinality ---------------------------------------------------

def test_dataset_cardinality_and_cadence(default_training_run):
    out, elapsed = default_training_run
    dataset = formats.load_dataset(os.path.join(out, "dataset.txt"))
    cfg = main_config()
    agents = cfg.n_robots + len(cfg.drop_stations)
    times = []
    seen = set()
    for r in dataset.records:
        if r.sim_time not in seen:
            seen.add(r.sim_time)
            times.append(r.sim_time)
    events = len(times)
    per_event = len(dataset) / events
    gaps = {round(b - a, 9) for a, b in zip(times, times[1:])}
    ok = (events == 6000
          and len(dataset) == 6000 * agents
          and per_event == agents
          and gaps == {4.0}
          and elapsed < 300.0)
    report("dataset-cardinality", ok,
           f"{events} events, {len(dataset)} records, gaps {sorted(gaps)}, "
           f"train wall time {elapsed:.0f}s")


# -- 2. discrepancy decay ------------------------------------------------------

def test_discrepancy_decay_and_static_flatline(default_training_run):
    out, _ = default_training_run
    curves = formats.load_curves(os.path.join(out, "curves.txt"))
    disable = curves["disable"]
    assert len(disable) == 240
    early = mean(disable[:20])
    late = mean(disable[220:240])
    arroch = curves["disable_arroch"]
    slope = least_squares_slope(arroch)
    ok = late <= 0.05 * early and slope >= -0.01
    report("discrepancy-decay", ok,
           f"early {early:.1f}, late {late:.2f} "
           f"(ratio {late / early:.4f}), static-baseline slope {slope:+.4f}")


# -- 3. efficiency ordering -----------------------------------------------------

def test_efficiency_ordering(default_training_run):
    out, _ = default_training_run
    learned = formats.load_policy(os.path.join(out, "policy.txt"))
    cfg = mini_config()
    seeds = range(5000, 5100)
    t0 = time.monotonic()
    lw = _run_many(cfg, learned, seeds)
    aw = _run_many(cfg, builtin_policy("allon"), seeds)
    nw = _run_many(cfg, builtin_policy("noviz"), seeds)
    elapsed = time.monotonic() - t0
    gap_allon = (mean(aw) - mean(lw)) / mean(aw)
    gap_noviz = (mean(nw) - mean(lw)) / mean(nw)
    _, _, _, p_allon = sign_test(lw, aw)
    _, _, _, p_noviz = sign_test(lw, nw)
    ok = (gap_allon >= 0.05 and gap_noviz >= 0.05
          and p_allon < 0.05 and p_noviz < 0.05
          and elapsed < 600.0)
    report("efficiency-ordering", ok,
           f"learned {mean(lw):.0f}s vs all-on {mean(aw):.0f}s "
           f"({gap_allon:.1%}, p={p_allon:.2e}) vs none {mean(nw):.0f}s "
           f"({gap_noviz:.1%}, p={p_noviz:.2e}), {elapsed:.0f}s wall")


# -- 4. checkpoint improvement ----------------------------------------------------

def test_checkpoint_improvement(default_training_run):
    out, _ = default_training_run
    manifest = formats.load_manifest(os.path.join(out, "manifest.txt"))
    names = manifest["artifact.checkpoints"].split(",")
    assert len(names) == 6, f"expected 6 checkpoints, got {len(names)}"
    first = formats.load_policy(os.path.join(out, names[0]))
    last = formats.load_policy(os.path.join(out, names[-1]))
    cfg = mini_config()
    seeds = range(7000, 7050)
    first_waits = _run_many(cfg, first, seeds)
    last_waits = _run_many(cfg, last, seeds)
    ok = mean(last_waits) < mean(first_waits)
    report("checkpoint-improvement", ok,
           f"first {mean(first_waits):.0f}s -> last {mean(last_waits):.0f}s "
           f"over {len(names)} checkpoints")


# -- 5. planner oracle -------------------------------------------------------------

def test_planner_matches_dijkstra_oracle():
    rng = random.Random(20240)
    t0 = time.monotonic()
    compared = 0
    for _ in range(50):
        grid = random_grid(rng, 20, 20, 0.2)
        free = [c for c in ((c, r) for c in range(20) for r in range(20))
                if grid.free(c)]
        start, goal = rng.choice(free), rng.choice(free)
        oracle = dijkstra_cost(grid, start, goal)
        if oracle is None:
            with pytest.raises(NoPathError):
                plan_cells(grid, start, goal)
            continue
        _, cost = plan_cells(grid, start, goal)
        assert cost == oracle, f"cost {cost} != oracle {oracle}"
        compared += 1
    elapsed = time.monotonic() - t0
    ok = compared >= 30 and elapsed < 10.0
    report("planner-oracle", ok,
           f"{compared} reachable pairs exact-equal in {elapsed:.2f}s")


# -- 6. classifier oracle ------------------------------------------------------------

def _brute_majority(records):
    votes_r: dict[int, list[list[int]]] = {}
    votes_s: dict[int, list[int]] = {}
    for r in records:
        if r.agent_kind == "robot":
            row = votes_r.setdefault(r.state, [[0, 0], [0, 0], [0, 0]])
            for ch in range(3):
                row[ch][r.action_bits[ch]] += 1
        else:
            row = votes_s.setdefault(r.state, [0, 0])
            row[r.action_bits[0]] += 1
    table_r = {s: tuple(1 if v[ch][1] >= v[ch][0] else 0 for ch in range(3))
               for s, v in votes_r.items()}
    table_s = {s: (1 if v[1] >= v[0] else 0,) for s, v in votes_s.items()}
    return table_r, table_s


def test_classifier_oracles():
    rng = random.Random(5150)
    for trial in range(100):
        n = rng.randint(1, 10_000 if trial % 10 == 0 else 500)
        records = []
        for _ in range(n):
            if rng.random() < 0.75:
                records.append(Demonstration(0, 0.0, "robot", 0,
                                             rng.randrange(N_ROBOT_STATES),
                                             tuple(rng.randint(0, 1)
                                                   for _ in range(3))))
            else:
                records.append(Demonstration(0, 0.0, "station", 0,
                                             rng.randrange(N_STATION_STATES),
                                             (rng.randint(0, 1),)))
        pol = train(AggregatedDataset(records), "tabular_majority")
        table_r, table_s = _brute_majority(records)
        for s, bits in table_r.items():
            assert pol.act_robot_index(s).bits() == bits, (trial, s)
        for s, bits in table_s.items():
            assert pol.act_station_index(s).bits() == bits, (trial, s)

    # realizable targets: the linear learner must hit 100% training accuracy
    exact = 0
    for round_ in range(3):
        labels = {s: tuple(rng.randint(0, 1) for _ in range(3))
                  for s in range(N_ROBOT_STATES)}
        records = [Demonstration(0, 0.0, "robot", 0, s, bits)
                   for s, bits in labels.items() for _ in range(2)]
        records.append(Demonstration(0, 0.0, "station", 0, 0, (1,)))
        pol = train(AggregatedDataset(records), "linear_multiclass")
        exact += sum(pol.act_robot_index(s).bits() == bits
                     for s, bits in labels.items())
    ok = exact == 3 * N_ROBOT_STATES
    report("classifier-oracle", ok,
           f"majority table exact on 100 random datasets; linear learner "
           f"{exact}/{3 * N_ROBOT_STATES} on realizable targets")


# -- 7. mix schedule endpoints ----------------------------------------------------------

def test_mix_schedule_endpoints_and_concentration():
    params = TrainerParams(iterations=240)
    start = mix_probability(0, params)
    end = mix_probability(239, params)
    rng = Pcg32(777)
    n = 10_000
    hits = sum(1 for _ in range(n)
               if mix_action(0.5, "expert", "novice", rng) == "expert")
    frequency = hits / n
    ok = start == 1.0 and end == 0.0 and abs(frequency - 0.5) <= 0.02
    report("mix-schedule", ok,
           f"start {start}, end {end}, expert share at 0.5: {frequency:.4f}")


# -- 8. determinism -----------------------------------------------------------------------

def test_byte_identical_reruns(tmp_path):
    cfg_path = str(tmp_path / "mini.json")
    formats.save_config(cfg_path, mini_config(0))

    def run_twice(args, outputs):
        blobs = []
        for tag in ("a", "b"):
            resolved = [a.format(tag=tag) for a in args]
            assert main(resolved) == 0
            blobs.append([open(o.format(tag=tag), "rb").read() for o in outputs])
        return blobs[0] == blobs[1]

    eval_same = run_twice(
        ["eval", "--config", cfg_path, "--policy", "allon", "--trials", "3",
         "--seed", "11", "--metrics", str(tmp_path / "m_{tag}.txt")],
        [str(tmp_path / "m_{tag}.txt")])
    train_same = run_twice(
        ["train", "--config", cfg_path, "--iterations", "2", "--pairs", "4",
         "--out", str(tmp_path / "t_{tag}")],
        [str(tmp_path / "t_{tag}") + "/dataset.txt",
         str(tmp_path / "t_{tag}") + "/policy.txt",
         str(tmp_path / "t_{tag}") + "/curves.txt",
         str(tmp_path / "t_{tag}") + "/manifest.txt"])
    ok = eval_same and train_same
    report("determinism-reruns", ok,
           f"eval byte-identical: {eval_same}, train byte-identical: {train_same}")


def test_command_log_replay_reproduces_metrics(tmp_path):
    """A recorded session (channel toggles + a mode switch back) replayed
    from its log lands on identical metrics."""
    from warevis.engine import Simulation
    from warevis.world import build_world

    cfg = mini_config(4)
    sim = Simulation(build_world(cfg), builtin_policy("allon"), WorkerParams())
    bridge = Bridge(sim)
    script = [
        (30, {"type": "set_channel", "agent_kind": "robot", "agent_id": 2,
              "channel": "trajectory", "on": False}),
        (30, {"type": "set_channel", "agent_kind": "station", "agent_id": 0,
              "channel": "balloon", "on": False}),
        (400, {"type": "set_channel", "agent_kind": "station", "agent_id": 0,
               "channel": "balloon", "on": True}),
    ]
    cursor = 0
    while not sim.complete and not sim.timed_out:
        while cursor < len(script) and script[cursor][0] == sim.world.tick:
            bridge.submit(script[cursor][1])
            cursor += 1
        sim.tick_once()
    live = sim.metrics()
    log_path = str(tmp_path / "log.txt")
    formats.save_command_log(log_path, bridge.command_entries)

    replayed = replay_command_log(cfg, DiscretizationThresholds(),
                                  WorkerParams(), log_path, "allon")
    cli_metrics_path = str(tmp_path / "replayed.txt")
    cfg_path = str(tmp_path / "mini4.json")
    formats.save_config(cfg_path, cfg)
    assert main(["replay", "--config", cfg_path, "--log", log_path,
                 "--policy", "allon", "--metrics", cli_metrics_path]) == 0
    rows, _ = formats.load_metrics(cli_metrics_path)
    cli_total = rows[0][2].total_wait

    ok = (replayed.total_wait == live.total_wait
          and replayed.completion_time == live.completion_time
          and replayed.per_robot_wait == live.per_robot_wait
          and cli_total == pytest.approx(live.total_wait, abs=5e-7))
    report("determinism-replay", ok,
           f"live {live.total_wait:.3f}s == replay {replayed.total_wait:.3f}s")


def test_zz_print_summary():
    print("\n" + "=" * 64)
    for line in REPORT:
        print(line)
    print("=" * 64)
