"""Bridge between a running simulation and the browser console.

One asyncio event loop owns everything: the paced tick task and the
websocket handlers.  Inbound commands are queued and drained at the next
tick boundary, so a recorded command log (tick, payload) replays a session
exactly.  Clients get a full snapshot on connect and then full frames at a
fixed wall-clock rate; every accepted command is acknowledged exactly once.

Message schema (JSON, discriminated by "type") is documented in FORMATS.md.
"""

from __future__ import annotations

import asyncio
import json
import threading
from dataclasses import replace
from http import HTTPStatus
from pathlib import Path
from typing import Optional

from . import formats
from .engine import Simulation, TrialMetrics, WorkerParams, trial_factory_for
from .features import DiscretizationThresholds
from .policy import ROBOT_CHANNELS, Policy, builtin_policy
from .training import (AggregatedDataset, InteractiveExpert, TrainerParams,
                       TrainingAborted, run_imitation)
from .world import WarehouseConfig, build_world, snapshot

SNAPSHOT_HZ = 10.0
MAX_SPEED = 16.0


# ---------------------------------------------------------------------------
# Command validation and application
# ---------------------------------------------------------------------------

class CommandError(ValueError):
    pass


def validate_command(payload: dict, sim: Simulation) -> None:
    kind = payload.get("type")
    if kind == "set_channel":
        agent_kind = payload.get("agent_kind")
        agent_id = payload.get("agent_id")
        channel = payload.get("channel")
        if agent_kind == "robot":
            if not isinstance(agent_id, int) or not (
                    0 <= agent_id < len(sim.world.robots)):
                raise CommandError(f"unknown robot id {agent_id}")
            if channel not in ROBOT_CHANNELS:
                raise CommandError(f"unknown robot channel {channel!r}")
        elif agent_kind == "station":
            if agent_id not in {s.id for s in sim.world.stations}:
                raise CommandError(f"unknown station id {agent_id}")
            if channel != "balloon":
                raise CommandError(f"unknown station channel {channel!r}")
        else:
            raise CommandError(f"unknown agent kind {agent_kind!r}")
        if not isinstance(payload.get("on"), bool):
            raise CommandError("set_channel needs a boolean 'on'")
    elif kind == "teleop":
        for key in ("forward", "strafe", "yaw_rate"):
            v = payload.get(key, 0.0)
            if not isinstance(v, (int, float)) or not -4.0 <= v <= 4.0:
                raise CommandError(f"teleop {key} out of range")
    elif kind == "set_speed":
        v = payload.get("multiplier")
        if not isinstance(v, (int, float)) or not 0.0 < v <= MAX_SPEED:
            raise CommandError(f"speed multiplier must be in (0, {MAX_SPEED:g}]")
    elif kind == "mode":
        if payload.get("mode") not in ("expert", "worker"):
            raise CommandError("mode must be 'expert' or 'worker'")
    elif kind not in ("pause", "resume"):
        raise CommandError(f"unknown command type {payload.get('type')!r}")


def apply_command(payload: dict, sim: Simulation,
                  expert: Optional[InteractiveExpert]) -> None:
    """Runs at a tick boundary, inside the simulation's command drain."""
    kind = payload["type"]
    if kind == "set_channel":
        key = (payload["agent_kind"], payload["agent_id"], payload["channel"])
        sim.channel_overrides[key] = payload["on"]
        if expert is not None:
            expert.set_channel(payload["agent_kind"], payload["agent_id"],
                               payload["channel"], payload["on"])
    elif kind == "teleop":
        sim.teleop_velocity = (float(payload.get("forward", 0.0)),
                               float(payload.get("strafe", 0.0)),
                               float(payload.get("yaw_rate", 0.0)))
    elif kind == "mode":
        sim.worker_params = replace(sim.worker_params,
                                    kind="teleop" if payload["mode"] == "worker"
                                    else "scripted")


# ---------------------------------------------------------------------------
# Snapshot serialization
# ---------------------------------------------------------------------------

def snapshot_message(sim: Simulation, mode: str, paused: bool, speed: float,
                     status: Optional[dict] = None) -> dict:
    world = sim.world
    cfg = world.config
    snap = snapshot(world)
    robots = []
    for r in snap.robots:
        overlay = snap.frame.robots.get(r.id)
        robots.append({
            "id": r.id,
            "x": round(r.pose.x, 4),
            "y": round(r.pose.y, 4),
            "heading": round(r.pose.heading, 4),
            "status": r.status.value,
            "carrying": r.carrying_box,
            "remaining": r.remaining_tasks,
            "color": overlay.color if overlay else "#888888",
            "channels": {
                "live_location": bool(overlay and overlay.action.live_location),
                "transparent_avatar": bool(overlay and overlay.action.transparent_avatar),
                "trajectory": bool(overlay and overlay.action.trajectory),
            },
            "polyline": [[round(x, 3), round(y, 3), round(w, 3)]
                         for x, y, w in (overlay.polyline if overlay else ())],
            "avatar_phase": round(overlay.avatar_phase, 4) if overlay else 0.0,
        })
    stations = []
    for s in snap.stations:
        stations.append({
            "id": s.id,
            "x": round(s.position[0], 4),
            "y": round(s.position[1], 4),
            "waiting": list(s.waiting_robot_ids),
            "balloon": bool(snap.frame.stations.get(s.id, False)),
        })
    checkboxes = {
        "robots": {str(r.id): {ch: sim.channel_overrides.get(("robot", r.id, ch), True)
                               for ch in ROBOT_CHANNELS}
                   for r in snap.robots},
        "stations": {str(s.id): sim.channel_overrides.get(("station", s.id, "balloon"), True)
                     for s in snap.stations},
    }
    msg = {
        "type": "snapshot",
        "sim_time": round(snap.sim_time, 4),
        "tick": world.tick,
        "mode": mode,
        "paused": paused,
        "speed": speed,
        "complete": sim.complete,
        "world": {
            "width": cfg.width,
            "height": cfg.height,
            "cell_size": cfg.cell_size,
            "shelves": [list(c) for c in cfg.shelf_cells],
        },
        "robots": robots,
        "stations": stations,
        "worker": {
            "x": round(snap.worker.pose.x, 4),
            "y": round(snap.worker.pose.y, 4),
            "heading": round(snap.worker.pose.heading, 4),
            "busy_until": round(snap.worker.busy_until, 4),
        },
        "checkboxes": checkboxes,
    }
    if status:
        msg["training"] = status
    return msg


# ---------------------------------------------------------------------------
# The bridge
# ---------------------------------------------------------------------------

class Bridge:
    """Shared state between the tick driver and the websocket handlers."""

    def __init__(self, sim: Simulation, expert: Optional[InteractiveExpert] = None,
                 static_dir: Optional[str] = None, command_log: Optional[str] = None,
                 speed: float = 1.0):
        self.sim = sim
        self.expert = expert
        self.static_dir = Path(static_dir) if static_dir else None
        self.command_log_path = command_log
        self.command_entries: list[tuple[int, dict]] = []
        self.speed = speed
        self.paused = False
        self.mode = "expert"
        self.clients: set = set()
        self.training_status: Optional[dict] = None
        self._ack_seq = 0

    # -- command intake (called from the websocket handler) -----------------

    def submit(self, payload: dict) -> dict:
        """Validate and queue a command; returns the ack message."""
        validate_command(payload, self.sim)
        command_id = payload.get("command_id")
        if command_id is None:
            self._ack_seq += 1
            command_id = f"srv-{self._ack_seq}"
        kind = payload["type"]
        if kind == "pause":
            self.paused = True
        elif kind == "resume":
            self.paused = False
        elif kind == "set_speed":
            # wall-clock pacing only; never part of the replay log
            self.speed = float(payload["multiplier"])
        else:
            # sim-affecting commands apply at the next tick boundary and are
            # logged with that tick so a replay lands them identically
            if kind == "mode":
                self.mode = payload["mode"]
            apply_tick = self.sim.world.tick
            self.command_entries.append((apply_tick, dict(payload)))
            self.sim.command_queue.append(
                lambda sim, p=dict(payload): apply_command(p, sim, self.expert))
        if self.expert is not None:
            self.expert.connected = bool(self.clients)
        return {"type": "ack", "command_id": command_id}

    def flush_command_log(self) -> None:
        if self.command_log_path:
            formats.save_command_log(self.command_log_path, self.command_entries)


def _static_response(bridge: Bridge, connection, request):
    """Serve console assets over plain HTTP on the same port."""
    if request.path == "/ws":
        return None  # proceed with the websocket upgrade
    if bridge.static_dir is None:
        return connection.respond(HTTPStatus.NOT_FOUND, "no static dir configured\n")
    rel = request.path.lstrip("/") or "index.html"
    target = (bridge.static_dir / rel).resolve()
    try:
        target.relative_to(bridge.static_dir.resolve())
    except ValueError:
        return connection.respond(HTTPStatus.FORBIDDEN, "forbidden\n")
    if target.is_dir():
        target = target / "index.html"
    if not target.is_file():
        return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")
    content_types = {".html": "text/html", ".js": "text/javascript",
                     ".css": "text/css", ".map": "application/json",
                     ".json": "application/json"}
    ctype = content_types.get(target.suffix, "application/octet-stream")
    body = target.read_bytes()
    from websockets.datastructures import Headers
    from websockets.http11 import Response
    headers = Headers([("Content-Type", ctype),
                       ("Content-Length", str(len(body)))])
    return Response(HTTPStatus.OK, "OK", headers, body)


async def _client_handler(bridge: Bridge, websocket) -> None:
    bridge.clients.add(websocket)
    if bridge.expert is not None:
        bridge.expert.connected = True
    try:
        first = snapshot_message(bridge.sim, bridge.mode, bridge.paused,
                                 bridge.speed, bridge.training_status)
        await websocket.send(json.dumps(first))
        async for raw in websocket:
            try:
                payload = json.loads(raw)
                if not isinstance(payload, dict):
                    raise CommandError("message must be a JSON object")
                ack = bridge.submit(payload)
            except (json.JSONDecodeError, CommandError) as e:
                await websocket.send(json.dumps({"type": "error", "message": str(e)}))
                continue
            await websocket.send(json.dumps(ack))
    finally:
        bridge.clients.discard(websocket)
        if bridge.expert is not None:
            bridge.expert.connected = bool(bridge.clients)


async def _broadcast_loop(bridge: Bridge, stop: asyncio.Event) -> None:
    interval = 1.0 / SNAPSHOT_HZ
    last_status = None
    while not stop.is_set():
        if bridge.clients:
            outbound = [json.dumps(snapshot_message(
                bridge.sim, bridge.mode, bridge.paused, bridge.speed,
                bridge.training_status))]
            if bridge.training_status and bridge.training_status != last_status:
                last_status = dict(bridge.training_status)
                outbound.append(json.dumps(
                    {"type": "iteration_status", **last_status}))
            for ws in list(bridge.clients):
                try:
                    for msg in outbound:
                        await ws.send(msg)
                except Exception:
                    bridge.clients.discard(ws)
        try:
            await asyncio.wait_for(stop.wait(), timeout=interval)
        except asyncio.TimeoutError:
            pass


async def _tick_loop(bridge: Bridge, stop: asyncio.Event) -> None:
    """Paced free-running simulation (serve mode)."""
    while not stop.is_set():
        if bridge.paused or bridge.sim.complete or bridge.sim.timed_out:
            await asyncio.sleep(0.05)
            continue
        bridge.sim.tick_once()
        await asyncio.sleep(bridge.sim.world.config.tick_duration / bridge.speed)


async def _serve_async(bridge: Bridge, port: int, stop: asyncio.Event) -> None:
    from websockets.asyncio.server import serve as ws_serve

    async def handler(websocket):
        await _client_handler(bridge, websocket)

    def process_request(connection, request):
        return _static_response(bridge, connection, request)

    async with ws_serve(handler, "127.0.0.1", port, process_request=process_request):
        tick = asyncio.create_task(_tick_loop(bridge, stop))
        cast = asyncio.create_task(_broadcast_loop(bridge, stop))
        await stop.wait()
        tick.cancel()
        cast.cancel()
    bridge.flush_command_log()


def serve_forever(config: WarehouseConfig, thresholds: DiscretizationThresholds,
                  worker: WorkerParams, policy: Policy, args) -> None:
    world = build_world(config)
    sim = Simulation(world, policy, worker, thresholds)
    bridge = Bridge(sim, static_dir=args.static_dir, command_log=args.command_log,
                    speed=args.speed)
    stop = asyncio.Event()
    print(f"serving on ws://127.0.0.1:{args.port}/ws "
          f"(static: {args.static_dir or 'disabled'}); ctrl-c to stop")
    try:
        asyncio.run(_serve_async(bridge, args.port, stop))
    except KeyboardInterrupt:
        bridge.flush_command_log()


def replay_command_log(config: WarehouseConfig, thresholds: DiscretizationThresholds,
                       worker: WorkerParams, log_path: str,
                       policy_spec: str = "allon") -> TrialMetrics:
    """Re-run a recorded session: commands re-apply at their recorded ticks,
    so the run reproduces bit-exactly."""
    entries = formats.load_command_log(log_path)
    if policy_spec in ("allon", "noviz", "arroch", "crmiar"):
        policy = builtin_policy(policy_spec)
    else:
        policy = formats.load_policy(policy_spec,
                                     expect_thresholds=thresholds.fingerprint())
    world = build_world(config)
    sim = Simulation(world, policy, worker, thresholds)
    by_tick: dict[int, list[dict]] = {}
    for tick, payload in entries:
        by_tick.setdefault(tick, []).append(payload)
    while not sim.complete and not sim.timed_out:
        for payload in by_tick.get(sim.world.tick, ()):
            sim.command_queue.append(
                lambda s, p=payload: apply_command(p, s, None))
        sim.tick_once()
    return sim.metrics()


# ---------------------------------------------------------------------------
# Interactive training (train --expert interactive --serve)
# ---------------------------------------------------------------------------

def run_interactive_training(config: WarehouseConfig,
                             thresholds: DiscretizationThresholds,
                             worker: WorkerParams, params: TrainerParams,
                             args) -> int:
    """Drive the imitation loop at wall-clock pace behind the bridge.

    The trainer runs on a worker thread; the asyncio loop owns the sockets.
    The expert's sticky checkboxes provide labels at snapshot events, and
    the display shows the executed (mixed) action.
    """
    import os

    station_ids = [sid for sid, _ in config.drop_stations]
    expert = InteractiveExpert(range(config.n_robots), station_ids)
    factory = trial_factory_for(config, worker, thresholds)

    bridge_box: dict[str, Bridge] = {}
    stop = asyncio.Event()
    loop_box: dict[str, asyncio.AbstractEventLoop] = {}
    started = threading.Event()

    def tick_hook(sim):
        bridge = bridge_box.get("bridge")
        if bridge is None:
            bridge = Bridge(sim, expert=expert,
                            static_dir=getattr(args, "static_dir", None),
                            speed=args.speed)
            bridge_box["bridge"] = bridge
        elif bridge.sim is not sim:
            bridge.sim = sim  # trainer rolled into a fresh trial
        # wall-clock pacing; pause support
        import time as _time
        _time.sleep(sim.world.config.tick_duration / max(bridge.speed, 1e-6))
        while bridge.paused:
            _time.sleep(0.05)

    def on_iteration(j, mix, size, disable):
        bridge = bridge_box.get("bridge")
        if bridge is not None:
            bridge.training_status = {"iteration": j, "mix": round(mix, 6),
                                      "dataset_size": size, "disable": disable}

    async def net_main():
        from websockets.asyncio.server import serve as ws_serve
        while "bridge" not in bridge_box:
            await asyncio.sleep(0.02)
        bridge = bridge_box["bridge"]

        async def handler(websocket):
            await _client_handler(bridge, websocket)

        def process_request(connection, request):
            return _static_response(bridge, connection, request)

        async with ws_serve(handler, "127.0.0.1", args.port,
                            process_request=process_request):
            cast = asyncio.create_task(_broadcast_loop(bridge, stop))
            started.set()
            await stop.wait()
            cast.cancel()

    def net_thread():
        loop = asyncio.new_event_loop()
        loop_box["loop"] = loop
        asyncio.set_event_loop(loop)
        loop.run_until_complete(net_main())

    thread = threading.Thread(target=net_thread, daemon=True)
    thread.start()

    dataset = AggregatedDataset()
    print(f"interactive training on ws://127.0.0.1:{args.port}/ws; "
          f"waiting for the console to connect...")
    try:
        result = run_imitation(factory, expert, dataset, params,
                               tick_hook=tick_hook, on_iteration=on_iteration)
    except TrainingAborted as e:
        print(f"aborted: {e}")
        return 1
    finally:
        loop = loop_box.get("loop")
        if loop is not None:
            loop.call_soon_threadsafe(stop.set)
        thread.join(timeout=2.0)

    os.makedirs(args.out, exist_ok=True)
    fp = thresholds.fingerprint()
    formats.save_dataset(os.path.join(args.out, "dataset.txt"), dataset, fp)
    formats.save_policy(os.path.join(args.out, "policy.txt"), result.policy, fp)
    print(f"done: {result.snapshot_events} snapshot events, "
          f"{len(dataset)} records -> {args.out}")
    return 0
