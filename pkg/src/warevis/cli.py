"""Command-line entry point: train, eval, compare, replay, serve.

Every subcommand is deterministic given its flags and seeds; run manifests
record fingerprints so artifacts are auditable.  Exit codes: 0 ok, 1
runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import formats, stats
from .configs import BUILTIN_CONFIGS, builtin_config
from .engine import TrialTimeout, WorkerParams, run_trial, trial_factory_for
from .features import DiscretizationThresholds
from .policy import builtin_policy, LEARNABLE_KINDS, Policy
from .training import (AggregatedDataset, ReplayExpert, ScriptedExpert,
                       TrainerParams, run_imitation)
from .world import ConfigError

_BUILTIN_POLICIES = ("allon", "noviz", "arroch", "crmiar")
_BASELINE_ORDER = ("arroch", "crmiar", "allon", "noviz")


def _load_scenario(args):
    if getattr(args, "config", None):
        config, thresholds, worker = formats.load_config(args.config)
    else:
        config = builtin_config(args.builtin)
        thresholds = DiscretizationThresholds()
        worker = WorkerParams()
    if getattr(args, "seed", None) is not None:
        config = replace(config, rng_seed=args.seed)
    return config, thresholds, worker


def _resolve_policy(spec: str, thresholds: DiscretizationThresholds) -> Policy:
    if spec in _BUILTIN_POLICIES:
        return builtin_policy(spec)
    return formats.load_policy(spec, expect_thresholds=thresholds.fingerprint())


def _run_trials(config, policy, worker, thresholds, n_trials, base_seed):
    """Seeded trials; trial k uses seed base_seed + k.  Timeouts keep their
    partial metrics and are marked in the output rows."""
    rows = []
    for k in range(n_trials):
        seed = base_seed + k
        try:
            m = run_trial(config, policy, worker, thresholds, seed=seed)
        except TrialTimeout as e:
            m = e.metrics
        rows.append((seed, policy.kind, m))
    return rows


def _summarize(rows):
    waits = [m.total_wait for _, _, m in rows]
    comps = [m.completion_time for _, _, m in rows]
    return {
        "mean_total_wait": stats.mean(waits),
        "stdev_total_wait": stats.stdev(waits),
        "mean_completion_time": stats.mean(comps),
        "stdev_completion_time": stats.stdev(comps),
    }


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    config, thresholds, worker = _load_scenario(args)
    params = TrainerParams(
        iterations=args.iterations,
        pairs_per_iteration=args.pairs,
        snapshot_interval=args.interval,
        mix_schedule=args.mix_schedule,
        mix_decay=args.mix_decay,
        rng_seed=args.trainer_seed,
        learner=args.learner,
        checkpoint_every=args.checkpoint_every,
    )

    if args.expert == "scripted":
        if args.expert_policy:
            base = formats.load_policy(args.expert_policy,
                                       expect_thresholds=thresholds.fingerprint())
            expert = ScriptedExpert.from_policy(base)
        else:
            expert = ScriptedExpert()
    elif args.expert == "replay":
        if not args.replay_log:
            raise UsageError("--expert replay requires --replay-log")
        log = formats.load_dataset(args.replay_log,
                                   expect_thresholds=thresholds.fingerprint())
        expert = ReplayExpert(log.records)
    else:  # interactive
        if not args.serve:
            raise UsageError("--expert interactive requires --serve")
        from .server import run_interactive_training
        return run_interactive_training(config, thresholds, worker, params, args)

    os.makedirs(args.out, exist_ok=True)
    factory = trial_factory_for(config, worker, thresholds)
    dataset = AggregatedDataset()
    baselines = {name: builtin_policy(name) for name in _BASELINE_ORDER}
    result = run_imitation(factory, expert, dataset, params, baselines=baselines)

    fp = thresholds.fingerprint()
    formats.save_dataset(os.path.join(args.out, "dataset.txt"), dataset, fp)
    formats.save_policy(os.path.join(args.out, "policy.txt"), result.policy, fp)
    formats.save_curves(os.path.join(args.out, "curves.txt"), result,
                        list(_BASELINE_ORDER))
    cp_dir = os.path.join(args.out, "checkpoints")
    os.makedirs(cp_dir, exist_ok=True)
    cp_names = []
    for j, pol in result.checkpoints:
        name = f"checkpoint_{j:04d}.txt"
        formats.save_policy(os.path.join(cp_dir, name), pol, fp)
        cp_names.append(f"checkpoints/{name}")
    manifest = {
        "artifact.dataset": "dataset.txt",
        "artifact.policy": "policy.txt",
        "artifact.curves": "curves.txt",
        "artifact.checkpoints": ",".join(cp_names),
        "config.fingerprint": formats.config_fingerprint(config, thresholds, worker),
        "thresholds.fingerprint": fp,
        "trainer.iterations": str(params.iterations),
        "trainer.pairs_per_iteration": str(params.pairs_per_iteration),
        "trainer.snapshot_interval": formats._f(params.snapshot_interval),
        "trainer.mix_schedule": params.mix_schedule,
        "trainer.learner": params.learner,
        "trainer.seed": str(params.rng_seed),
        "world.seed": str(config.rng_seed),
        "result.snapshot_events": str(result.snapshot_events),
        "result.records": str(len(dataset)),
        "result.trials": str(result.trials_run),
    }
    formats.save_manifest(os.path.join(args.out, "manifest.txt"), manifest)
    print(f"trained {params.learner} over {params.iterations} iterations: "
          f"{result.snapshot_events} snapshot events, {len(dataset)} records, "
          f"{result.trials_run} trials -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    config, thresholds, worker = _load_scenario(args)
    policy = _resolve_policy(args.policy, thresholds)
    rows = _run_trials(config, policy, worker, thresholds, args.trials, args.seed)
    summary = _summarize(rows)
    os.makedirs(os.path.dirname(os.path.abspath(args.metrics)), exist_ok=True)
    formats.save_metrics(args.metrics, rows, summary)
    print(f"{policy.kind}: {args.trials} trials, mean total wait "
          f"{summary['mean_total_wait']:.1f}s "
          f"(stdev {summary['stdev_total_wait']:.1f}), mean completion "
          f"{summary['mean_completion_time']:.1f}s -> {args.metrics}")
    return 0


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def cmd_compare(args) -> int:
    config, thresholds, worker = _load_scenario(args)
    learned = _resolve_policy(args.learned, thresholds)
    policies = [("learned", learned)]
    policies += [(name, builtin_policy(name)) for name in _BASELINE_ORDER]

    os.makedirs(args.out, exist_ok=True)
    all_rows = {}
    for label, policy in policies:
        rows = _run_trials(config, policy, worker, thresholds, args.trials, args.seed)
        all_rows[label] = rows
        formats.save_metrics(os.path.join(args.out, f"metrics_{label}.txt"),
                             rows, _summarize(rows))

    means = {label: stats.mean([m.total_wait for _, _, m in rows])
             for label, rows in all_rows.items()}
    ranked = sorted(means, key=lambda k: means[k])
    learned_waits = [m.total_wait for _, _, m in all_rows["learned"]]

    lines = ["policy ranking by mean total wait (paired seeds "
             f"{args.seed}..{args.seed + args.trials - 1}):"]
    for label in ranked:
        lines.append(f"  {label:8s} {means[label]:10.1f}s")
    lines.append("paired sign tests, learned vs baseline (wins/losses/ties, p):")
    for label, rows in all_rows.items():
        if label == "learned":
            continue
        other = [m.total_wait for _, _, m in rows]
        wx, wy, ties, p = stats.sign_test(learned_waits, other)
        lines.append(f"  learned vs {label:8s} {wx}/{wy}/{ties}  p={p:.6f}")
    report = "\n".join(lines) + "\n"
    with open(os.path.join(args.out, "comparison.txt"), "w", encoding="utf-8") as fh:
        fh.write(report)
    print(report, end="")
    return 0


# ---------------------------------------------------------------------------
# replay / serve
# ---------------------------------------------------------------------------

def cmd_replay(args) -> int:
    config, thresholds, worker = _load_scenario(args)
    from .server import replay_command_log
    metrics = replay_command_log(config, thresholds, worker, args.log, args.policy)
    rows = [(config.rng_seed, "replay", metrics)]
    if args.metrics:
        formats.save_metrics(args.metrics, rows, _summarize(rows))
    print(f"replayed {args.log}: total wait {metrics.total_wait:.1f}s, "
          f"completion {metrics.completion_time:.1f}s, "
          f"boxes {metrics.boxes_delivered}")
    return 0


def cmd_serve(args) -> int:
    config, thresholds, worker = _load_scenario(args)
    policy = _resolve_policy(args.policy, thresholds)
    if args.static_dir is None:
        candidate = os.path.join(os.getcwd(), "frontend", "dist")
        if os.path.isdir(candidate):
            args.static_dir = candidate
    from .server import serve_forever
    serve_forever(config, thresholds, worker, policy, args)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class UsageError(Exception):
    pass


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario config file (JSON)")
    p.add_argument("--builtin", default="main", choices=sorted(BUILTIN_CONFIGS),
                   help="builtin scenario when no --config is given")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warevis",
        description="Warehouse human-robot simulation with learned "
                    "visualization policies")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the imitation-learning loop")
    _add_scenario_flags(p)
    p.add_argument("--seed", type=int, help="override the scenario's world seed")
    p.add_argument("--iterations", type=int, default=240)
    p.add_argument("--pairs", type=int, default=25,
                   help="snapshot events per iteration")
    p.add_argument("--interval", type=float, default=4.0,
                   help="sim seconds between snapshot events")
    p.add_argument("--mix-schedule", default="linear",
                   choices=("linear", "exponential"))
    p.add_argument("--mix-decay", type=float, default=0.9)
    p.add_argument("--trainer-seed", type=int, default=0)
    p.add_argument("--learner", default="tabular_majority", choices=LEARNABLE_KINDS)
    p.add_argument("--checkpoint-every", type=int, default=40)
    p.add_argument("--expert", default="scripted",
                   choices=("scripted", "interactive", "replay"))
    p.add_argument("--expert-policy",
                   help="policy file that overrides the scripted expert rules")
    p.add_argument("--replay-log", help="dataset file replayed as the expert")
    p.add_argument("--serve", action="store_true",
                   help="expose the run on the bridge server (interactive expert)")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--speed", type=float, default=1.0,
                   help="wall-clock speed multiplier for interactive runs")
    p.add_argument("--out", default="out/train")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run seeded trials for one policy")
    _add_scenario_flags(p)
    p.add_argument("--policy", required=True,
                   help=f"policy file or one of {', '.join(_BUILTIN_POLICIES)}")
    p.add_argument("--trials", type=int, default=250)
    p.add_argument("--seed", type=int, default=0,
                   help="base seed; trial k uses seed+k")
    p.add_argument("--metrics", default="out/metrics.txt")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare",
                       help="learned policy vs the four static baselines")
    _add_scenario_flags(p)
    p.add_argument("--learned", required=True, help="trained policy file")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out/compare")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("replay", help="re-run a recorded command log")
    _add_scenario_flags(p)
    p.add_argument("--log", required=True, help="command log file")
    p.add_argument("--policy", default="allon")
    p.add_argument("--metrics", help="write the replayed trial's metrics here")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="run a live simulation behind the bridge")
    _add_scenario_flags(p)
    p.add_argument("--seed", type=int, help="override the scenario's world seed")
    p.add_argument("--policy", default="allon")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--static-dir", default=None,
                   help="directory of console assets to serve over HTTP")
    p.add_argument("--command-log", default=None,
                   help="record accepted commands for later replay")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        parser.error(str(e))  # exits 2
    except (ConfigError, formats.FormatError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
