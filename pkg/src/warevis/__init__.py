"""Deterministic warehouse human-robot simulation with learned
visualization policies."""

from .configs import builtin_config
from .engine import Simulation, TrialMetrics, WorkerParams, run_trial
from .features import DiscretizationThresholds
from .policy import Policy, builtin_policy, train
from .training import AggregatedDataset, TrainerParams, run_imitation, ScriptedExpert
from .world import WarehouseConfig, WorldSnapshot, build_world, snapshot

__all__ = [
    "AggregatedDataset", "DiscretizationThresholds", "Policy", "Simulation",
    "TrainerParams", "TrialMetrics", "WarehouseConfig", "WorkerParams",
    "WorldSnapshot", "ScriptedExpert", "build_world", "builtin_config",
    "builtin_policy", "run_imitation", "run_trial", "snapshot", "train",
]

__version__ = "0.1.0"
