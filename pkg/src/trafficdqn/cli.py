"""Command-line entry point: ``trafficdqn {train,evaluate,compare,smoke}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiment
from .config import ConfigError, ExperimentConfig, parse_config, replace
from .controllers import ControllerKind

log = logging.getLogger("trafficdqn")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--rho", type=float, help="demand scale in [0.1, 1]")
    common.add_argument("--episodes", type=int)
    common.add_argument("--controller", choices=[k.value for k in ControllerKind])
    common.add_argument("--checkpoint", type=Path)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--desk-scale", action="store_true", default=None, help="300 episodes x 1800 s preset")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="trafficdqn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train a DQN controller, write training curve and checkpoints")
    sub.add_parser("evaluate", parents=[common], help="evaluate one controller at --rho over the eval seeds")
    sub.add_parser("compare", parents=[common], help="sweep all controllers over the rho grid")
    sub.add_parser("smoke", parents=[common], help="tiny end-to-end run of train + compare")
    return parser


def _config(args) -> ExperimentConfig:
    overrides = {
        "seed": args.seed,
        "rho": args.rho,
        "episodes": args.episodes,
        "controller": args.controller,
        "checkpoint": args.checkpoint,
        "out": args.out,
    }
    return parse_config(args.config, overrides, desk_scale=args.desk_scale)


def _train(config):
    def progress(stats):
        log.info("episode %d mean staying sum %.1f s", stats.episode, stats.mean_staying_sum)

    curve, _ = experiment.run_training_experiment(config, progress)
    print(f"training curve: {curve}")
    print(f"final checkpoint: {Path(config.out) / 'final.ckpt'}")


def _evaluate(config):
    path, rows = experiment.run_comparison_sweep(
        config, controllers=[config.controller], rhos=[config.rho], filename="evaluation.csv"
    )
    for row in rows:
        delays = " ".join(f"{row[f'delay_road{r}_s']:.1f}" for r in range(4))
        print(f"{row['controller']} rho={row['rho']} seed={row['seed']} delays(s): {delays}")
    print(f"evaluation: {path}")


def _compare(config):
    path, _ = experiment.run_comparison_sweep(config)
    print(f"comparison: {path}")


def _smoke(config):
    out = Path(config.out)
    config = replace(
        config,
        controller=ControllerKind.DQN,
        episodes=2,
        episode_length=300,
        memory_capacity=200,
        checkpoint_every=1,
        out=out,
    )
    curve, history = experiment.run_training_experiment(config)
    config = replace(config, checkpoint=out / "final.ckpt")
    path, rows = experiment.run_comparison_sweep(config, rhos=[config.rho], seeds=config.eval_seeds[:1])
    print(f"smoke ok: {len(history)} episodes -> {curve}; {len(rows)} comparison rows -> {path}")


COMMANDS = {"train": _train, "evaluate": _evaluate, "compare": _compare, "smoke": _smoke}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = _config(args)
        COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
