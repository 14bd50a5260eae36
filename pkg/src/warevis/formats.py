"""Stable on-disk text formats.

Every artifact is line-oriented UTF-8 with a one-line versioned header of
the form ``#warevis <artifact> <version>``.  Field order is fixed and floats
are written with six decimal digits, so identical inputs serialize to
identical bytes.  Readers reject unknown versions and report malformed
records with their line number.  The exact grammars live in FORMATS.md.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict
from typing import Optional

from . import features as ft
from .engine import TrialMetrics, WorkerParams
from .policy import (Policy, StationVizAction, TabularMajorityPolicy,
                     builtin_policy, robot_action_from_bits, LEARNABLE_KINDS)
from .training import AggregatedDataset, Demonstration
from .world import Task, WarehouseConfig, ConfigError

FORMAT_VERSIONS = {
    "config": 1,
    "dataset": 1,
    "policy": 1,
    "metrics": 1,
    "manifest": 1,
    "cmdlog": 1,
    "tasks": 1,
    "curves": 1,
}


class FormatError(ValueError):
    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class VersionMismatchError(FormatError):
    pass


class FingerprintMismatchError(FormatError):
    pass


def _f(x: float) -> str:
    return f"{x:.6f}"


def _header(artifact: str) -> str:
    return f"#warevis {artifact} {FORMAT_VERSIONS[artifact]}"


def _check_header(path: str, lines: list[str], artifact: str) -> None:
    if not lines:
        raise FormatError(path, 1, f"empty file, expected {artifact} header")
    parts = lines[0].split()
    if len(parts) != 3 or parts[0] != "#warevis" or parts[1] != artifact:
        raise FormatError(path, 1, f"expected '{_header(artifact)}' header, got {lines[0]!r}")
    if parts[2] != str(FORMAT_VERSIONS[artifact]):
        raise VersionMismatchError(
            path, 1, f"unsupported {artifact} version {parts[2]} "
                     f"(this build reads version {FORMAT_VERSIONS[artifact]})")


def _read_lines(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read().splitlines()


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# Config files (JSON with fixed schema; unknown keys are errors)
# ---------------------------------------------------------------------------

_WAREHOUSE_KEYS = {
    "width", "height", "cell_size", "shelf_cells", "drop_stations", "n_robots",
    "home_cells", "worker_start_cell", "rng_seed", "robot_speed",
    "boxes_per_robot", "unload_radius", "tick_duration", "time_cap",
}
_WORKER_KEYS = {"kind", "speed", "decision_latency", "latency_per_element",
                "fov_half_angle_deg", "sight_range"}
_THRESHOLD_KEYS = {f.name for f in ft.DiscretizationThresholds.__dataclass_fields__.values()}
_TOP_KEYS = {"warehouse", "thresholds", "worker"}


def config_to_dict(config: WarehouseConfig,
                   thresholds: ft.DiscretizationThresholds,
                   worker: WorkerParams) -> dict:
    return {
        "warehouse": {
            "width": config.width,
            "height": config.height,
            "cell_size": config.cell_size,
            "shelf_cells": [list(c) for c in config.shelf_cells],
            "drop_stations": [{"id": sid, "cell": list(cell)}
                              for sid, cell in config.drop_stations],
            "n_robots": config.n_robots,
            "home_cells": [list(c) for c in config.home_cells],
            "worker_start_cell": list(config.worker_start_cell),
            "rng_seed": config.rng_seed,
            "robot_speed": config.robot_speed,
            "boxes_per_robot": config.boxes_per_robot,
            "unload_radius": config.unload_radius,
            "tick_duration": config.tick_duration,
            "time_cap": config.time_cap,
        },
        "thresholds": asdict(thresholds),
        "worker": {
            "kind": worker.kind,
            "speed": worker.speed,
            "decision_latency": worker.decision_latency,
            "latency_per_element": worker.latency_per_element,
            "fov_half_angle_deg": round(math.degrees(config.worker_fov_half_angle), 6),
            "sight_range": config.worker_sight_range,
        },
    }


def config_from_dict(data: dict
                     ) -> tuple[WarehouseConfig, ft.DiscretizationThresholds, WorkerParams]:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    if "warehouse" not in data:
        raise ConfigError("config is missing the 'warehouse' section")

    wh = dict(data["warehouse"])
    unknown = set(wh) - _WAREHOUSE_KEYS
    if unknown:
        raise ConfigError(f"unknown warehouse key(s): {sorted(unknown)}")
    worker_raw = dict(data.get("worker", {}))
    unknown = set(worker_raw) - _WORKER_KEYS
    if unknown:
        raise ConfigError(f"unknown worker key(s): {sorted(unknown)}")
    th_raw = dict(data.get("thresholds", {}))
    unknown = set(th_raw) - _THRESHOLD_KEYS
    if unknown:
        raise ConfigError(f"unknown threshold key(s): {sorted(unknown)}")

    try:
        stations = tuple((int(s["id"]), (int(s["cell"][0]), int(s["cell"][1])))
                         for s in wh["drop_stations"])
    except (KeyError, TypeError, IndexError) as e:
        raise ConfigError(f"drop_stations entries must be {{id, cell}} objects: {e}")

    kwargs = {
        "width": float(wh["width"]),
        "height": float(wh["height"]),
        "shelf_cells": tuple((int(c[0]), int(c[1])) for c in wh["shelf_cells"]),
        "drop_stations": stations,
        "n_robots": int(wh["n_robots"]),
        "home_cells": tuple((int(c[0]), int(c[1])) for c in wh["home_cells"]),
        "worker_start_cell": (int(wh["worker_start_cell"][0]),
                              int(wh["worker_start_cell"][1])),
    }
    for key in ("cell_size", "robot_speed", "unload_radius", "tick_duration", "time_cap"):
        if key in wh:
            kwargs[key] = float(wh[key])
    for key in ("rng_seed", "boxes_per_robot"):
        if key in wh:
            kwargs[key] = int(wh[key])
    if "fov_half_angle_deg" in worker_raw:
        kwargs["worker_fov_half_angle"] = math.radians(float(worker_raw.pop("fov_half_angle_deg")))
    if "sight_range" in worker_raw:
        kwargs["worker_sight_range"] = float(worker_raw.pop("sight_range"))
    config = WarehouseConfig(**kwargs)
    config.validate()
    try:
        thresholds = ft.DiscretizationThresholds(**th_raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad thresholds: {e}")
    try:
        worker = WorkerParams(**worker_raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad worker section: {e}")
    return config, thresholds, worker


def save_config(path: str, config: WarehouseConfig,
                thresholds: ft.DiscretizationThresholds = ft.DiscretizationThresholds(),
                worker: WorkerParams = WorkerParams()) -> None:
    _write_text(path, json.dumps(config_to_dict(config, thresholds, worker),
                                 indent=2, sort_keys=True) + "\n")


def load_config(path: str) -> tuple[WarehouseConfig, ft.DiscretizationThresholds, WorkerParams]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON: {e}")
    return config_from_dict(data)


def config_fingerprint(config: WarehouseConfig,
                       thresholds: ft.DiscretizationThresholds,
                       worker: WorkerParams) -> str:
    blob = json.dumps(config_to_dict(config, thresholds, worker), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Datasets (also the expert replay-log format)
# ---------------------------------------------------------------------------

def save_dataset(path: str, dataset: AggregatedDataset, thresholds_fp: str) -> None:
    lines = [_header("dataset"), f"thresholds {thresholds_fp}"]
    for r in dataset.records:
        bits = " ".join(str(b) for b in r.action_bits)
        lines.append(f"{r.iteration} {_f(r.sim_time)} {r.agent_kind} "
                     f"{r.agent_id} {r.state} {bits}")
    _write_text(path, "\n".join(lines) + "\n")


def load_dataset(path: str, expect_thresholds: Optional[str] = None) -> AggregatedDataset:
    lines = _read_lines(path)
    _check_header(path, lines, "dataset")
    if len(lines) < 2 or not lines[1].startswith("thresholds "):
        raise FormatError(path, 2, "missing 'thresholds <fingerprint>' line")
    fp = lines[1].split()[1]
    if expect_thresholds is not None and fp != expect_thresholds:
        raise FingerprintMismatchError(
            path, 2, f"dataset built with thresholds {fp}, expected {expect_thresholds}")
    dataset = AggregatedDataset()
    for i, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split()
        if len(parts) < 6:
            raise FormatError(path, i, f"malformed dataset record: {line!r}")
        try:
            kind = parts[2]
            n_bits = 3 if kind == "robot" else 1
            if kind not in ("robot", "station") or len(parts) != 5 + n_bits:
                raise ValueError(f"bad record shape for kind {kind!r}")
            rec = Demonstration(
                iteration=int(parts[0]), sim_time=float(parts[1]), agent_kind=kind,
                agent_id=int(parts[3]), state=int(parts[4]),
                action_bits=tuple(int(b) for b in parts[5:5 + n_bits]))
        except ValueError as e:
            raise FormatError(path, i, f"malformed dataset record: {e}")
        dataset.append(rec)
    return dataset


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

def save_policy(path: str, policy: Policy, thresholds_fp: str) -> None:
    lines = [_header("policy"),
             f"kind {policy.kind}",
             f"thresholds {thresholds_fp}",
             f"version {policy.version}"]
    if policy.kind in LEARNABLE_KINDS:
        # a policy over a finite state space serializes as its decision table
        for s, action in enumerate(policy.robot_table()):
            b = action.bits()
            lines.append(f"R {s} {b[0]} {b[1]} {b[2]}")
        for s, action in enumerate(policy.station_table()):
            lines.append(f"S {s} {action.bits()[0]}")
    _write_text(path, "\n".join(lines) + "\n")


def load_policy(path: str, expect_thresholds: Optional[str] = None) -> Policy:
    lines = _read_lines(path)
    _check_header(path, lines, "policy")
    meta: dict[str, str] = {}
    body_start = 1
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if parts and parts[0] in ("kind", "thresholds", "version"):
            meta[parts[0]] = parts[1]
            body_start = i
        else:
            break
    for key in ("kind", "thresholds", "version"):
        if key not in meta:
            raise FormatError(path, body_start, f"policy header missing '{key}'")
    if expect_thresholds is not None and meta["thresholds"] != expect_thresholds:
        raise FingerprintMismatchError(
            path, 2, f"policy built with thresholds {meta['thresholds']}, "
                     f"expected {expect_thresholds}")
    kind = meta["kind"]
    version = int(meta["version"])
    if kind not in LEARNABLE_KINDS:
        policy = builtin_policy(kind)
        policy.version = version
        return policy

    robot_table = [None] * ft.N_ROBOT_STATES
    station_table = [None] * ft.N_STATION_STATES
    for i, line in enumerate(lines[body_start:], start=body_start + 1):
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "R" and len(parts) == 5:
                robot_table[int(parts[1])] = robot_action_from_bits(
                    (int(parts[2]), int(parts[3]), int(parts[4])))
            elif parts[0] == "S" and len(parts) == 3:
                station_table[int(parts[1])] = StationVizAction(bool(int(parts[2])))
            else:
                raise ValueError("unrecognized record")
        except (ValueError, IndexError) as e:
            raise FormatError(path, i, f"malformed policy record {line!r}: {e}")
    if any(a is None for a in robot_table) or any(a is None for a in station_table):
        raise FormatError(path, len(lines), "policy table is incomplete")
    # linear policies reload as their decision table; execution is identical
    return TabularMajorityPolicy(robot_table, station_table, version)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def save_metrics(path: str, rows: list[tuple[int, str, TrialMetrics]],
                 summary: Optional[dict] = None) -> None:
    """rows: (seed, policy kind, metrics).  Summary keys are written sorted."""
    lines = [_header("metrics")]
    for seed, kind, m in rows:
        per_robot = " ".join(_f(w) for w in m.per_robot_wait)
        lines.append(f"{seed} {kind} {_f(m.total_wait)} {_f(m.completion_time)} "
                     f"{m.boxes_delivered} {int(m.timed_out)}"
                     + (f" {per_robot}" if per_robot else ""))
    if summary:
        for key in sorted(summary):
            lines.append(f"summary {key} {_f(summary[key])}")
    _write_text(path, "\n".join(lines) + "\n")


def load_metrics(path: str) -> tuple[list[tuple[int, str, TrialMetrics]], dict]:
    lines = _read_lines(path)
    _check_header(path, lines, "metrics")
    rows: list[tuple[int, str, TrialMetrics]] = []
    summary: dict[str, float] = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split()
        if parts[0] == "summary":
            if len(parts) != 3:
                raise FormatError(path, i, "malformed summary line")
            summary[parts[1]] = float(parts[2])
            continue
        if len(parts) < 6:
            raise FormatError(path, i, f"malformed metrics row: {line!r}")
        try:
            per_robot = [float(x) for x in parts[6:]]
            m = TrialMetrics(per_robot, float(parts[2]), float(parts[3]),
                             int(parts[4]), timed_out=bool(int(parts[5])))
            rows.append((int(parts[0]), parts[1], m))
        except ValueError as e:
            raise FormatError(path, i, f"malformed metrics row: {e}")
    return rows, summary


# ---------------------------------------------------------------------------
# Training curves
# ---------------------------------------------------------------------------

def save_curves(path: str, result, baseline_names: list[str]) -> None:
    cols = "iteration mix dataset_size disable mismatch " + " ".join(
        f"disable_{n}" for n in baseline_names)
    lines = [_header("curves"), f"columns {cols.strip()}"]
    for j in range(len(result.disable_curve)):
        row = (f"{j} {_f(result.mix_curve[j])} {result.dataset_sizes[j]} "
               f"{result.disable_curve[j]} {result.mismatch_curve[j]}")
        for name in baseline_names:
            row += f" {result.baseline_curves[name][j]}"
        lines.append(row)
    _write_text(path, "\n".join(lines) + "\n")


def load_curves(path: str) -> dict[str, list[float]]:
    lines = _read_lines(path)
    _check_header(path, lines, "curves")
    if len(lines) < 2 or not lines[1].startswith("columns "):
        raise FormatError(path, 2, "missing columns line")
    names = lines[1].split()[1:]
    series: dict[str, list[float]] = {n: [] for n in names}
    for i, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split()
        if len(parts) != len(names):
            raise FormatError(path, i, "curve row width does not match columns")
        for name, value in zip(names, parts):
            series[name].append(float(value))
    return series


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

def save_manifest(path: str, entries: dict[str, str]) -> None:
    lines = [_header("manifest")]
    for key in sorted(entries):
        lines.append(f"{key} {entries[key]}")
    _write_text(path, "\n".join(lines) + "\n")


def load_manifest(path: str) -> dict[str, str]:
    lines = _read_lines(path)
    _check_header(path, lines, "manifest")
    entries: dict[str, str] = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        key, _, value = line.partition(" ")
        if not value:
            raise FormatError(path, i, f"malformed manifest line: {line!r}")
        entries[key] = value
    return entries


# ---------------------------------------------------------------------------
# Command logs (bridge replay)
# ---------------------------------------------------------------------------

def save_command_log(path: str, entries: list[tuple[int, dict]]) -> None:
    lines = [_header("cmdlog")]
    for tick, payload in entries:
        lines.append(f"{tick} {json.dumps(payload, sort_keys=True)}")
    _write_text(path, "\n".join(lines) + "\n")


def load_command_log(path: str) -> list[tuple[int, dict]]:
    lines = _read_lines(path)
    _check_header(path, lines, "cmdlog")
    entries: list[tuple[int, dict]] = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        tick_str, _, payload = line.partition(" ")
        try:
            entries.append((int(tick_str), json.loads(payload)))
        except (ValueError, json.JSONDecodeError) as e:
            raise FormatError(path, i, f"malformed command log line: {e}")
    return entries


# ---------------------------------------------------------------------------
# Task pools
# ---------------------------------------------------------------------------

def save_tasks(path: str, tasks: list[Task]) -> None:
    lines = [_header("tasks")]
    for t in tasks:
        lines.append(f"{t.shelf_cell[0]} {t.shelf_cell[1]} {t.station_id}")
    _write_text(path, "\n".join(lines) + "\n")


def load_tasks(path: str) -> list[Task]:
    lines = _read_lines(path)
    _check_header(path, lines, "tasks")
    tasks: list[Task] = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(path, i, f"malformed task record: {line!r}")
        try:
            tasks.append(Task((int(parts[0]), int(parts[1])), int(parts[2])))
        except ValueError as e:
            raise FormatError(path, i, f"malformed task record: {e}")
    return tasks
