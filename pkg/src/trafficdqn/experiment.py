"""Training runs, controller evaluation and comparison sweeps with CSV output."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint
from .agent import DQNAgent
from .config import ExperimentConfig
from .controllers import ControllerKind, make_controller
from .sim import N_ROADS, Intersection, RouteTable, SignalSchedule, run_time_step

log = logging.getLogger(__name__)

MISSING = "NA"
TRAINING_COLUMNS = (
    ["episode", "mean_staying_sum_s"]
    + [f"delay_road{r}_s" for r in range(N_ROADS)]
    + [f"exits_road{r}" for r in range(N_ROADS)]
    + ["epsilon", "memory_size"]
)
COMPARISON_COLUMNS = (
    ["controller", "rho", "seed", "mean_staying_sum_s"]
    + [f"delay_road{r}_s" for r in range(N_ROADS)]
    + [f"exits_road{r}" for r in range(N_ROADS)]
)

# separate traffic streams for training and evaluation episodes
_TRAIN_STREAM, _EVAL_STREAM = 0, 1


def traffic_rng(seed: int, stream: int, episode: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, episode])


@dataclass(frozen=True)
class EpisodeStats:
    episode: int
    mean_staying_sum: float
    mean_delay: tuple[float, ...]  # NaN for roads without exits
    exits: tuple[int, ...]

    @classmethod
    def from_run(cls, episode, ticks, exit_records) -> EpisodeStats:
        delays = [[] for _ in range(N_ROADS)]
        for rec in exit_records:
            delays[rec.road].append(rec.delay)
        mean_delay = tuple(float(np.mean(d)) if d else math.nan for d in delays)
        mean_staying = float(np.mean([t.staying_sum for t in ticks])) if ticks else math.nan
        return cls(episode, mean_staying, mean_delay, tuple(len(d) for d in delays))


def _fmt(x) -> str:
    if isinstance(x, float):
        return MISSING if math.isnan(x) else repr(x)
    return str(x)


def _header_line(kind: str, fields: dict) -> str:
    return "# trafficdqn " + kind + " " + " ".join(f"{k}={v}" for k, v in fields.items()) + "\n"


def read_csv(path) -> list[dict[str, str]]:
    """Rows of a CSV written here, skipping the ``#`` metadata line."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(lines))))


def ensure_writable(directory: Path):
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PermissionError(f"cannot create output directory {directory}: {exc}") from exc
    if not os.access(directory, os.W_OK):
        raise PermissionError(f"output directory {directory} is not writable")


# --------------------------------------------------------------------------
# training


def run_training_experiment(config: ExperimentConfig, progress=None) -> tuple[Path, list[EpisodeStats]]:
    """Train a DQN agent and write ``training_curve.csv`` plus checkpoints.

    Checkpoints go to ``<out>/checkpoints/episode_XXXXX.ckpt`` every
    ``checkpoint_every`` episodes, and the final parameters to
    ``<out>/final.ckpt``. ``progress`` is called with each EpisodeStats.
    """
    if config.controller is not ControllerKind.DQN:
        raise ValueError("training needs controller=dqn")
    out = Path(config.out)
    ensure_writable(out)
    ensure_writable(out / "checkpoints")
    h = config.hyper
    agent = DQNAgent(h, config.seed)
    route_table = RouteTable(rho=config.rho)
    meta = {**config.header_fields()}

    curve = out / "training_curve.csv"
    history = []
    with open(curve, "w", newline="") as fh:
        fh.write(_header_line("training", meta))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAINING_COLUMNS)
        for episode in range(h.episodes):
            world = Intersection(route_table, traffic_rng(config.seed, _TRAIN_STREAM, episode))
            trace = agent.run_episode(world, learn=True)
            stats = EpisodeStats.from_run(episode, trace.ticks, world.exits)
            history.append(stats)
            writer.writerow(
                [episode, _fmt(stats.mean_staying_sum)]
                + [_fmt(d) for d in stats.mean_delay]
                + list(stats.exits)
                + [_fmt(float(h.epsilon)), len(agent.memory)]
            )
            fh.flush()
            if (episode + 1) % h.checkpoint_every == 0:
                checkpoint.save(
                    out / "checkpoints" / f"episode_{episode + 1:05d}.ckpt",
                    agent.params,
                    config.seed,
                    h.to_dict(),
                )
            if progress is not None:
                progress(stats)
    checkpoint.save(out / "final.ckpt", agent.params, config.seed, h.to_dict())
    return curve, history


# --------------------------------------------------------------------------
# evaluation


def evaluate_controller(controller, rho: float, seed: int, episode_length: int, tau_g=10, tau_y=6) -> EpisodeStats:
    """One evaluation episode; the controller only decides, nothing learns."""
    world = Intersection(RouteTable(rho=rho), traffic_rng(seed, _EVAL_STREAM, 0))
    schedule = SignalSchedule(current_action=0, tau_g=tau_g, tau_y=tau_y)
    ticks = []
    while world.clock < episode_length:
        action = controller(world, schedule, world.clock)
        schedule, _ = run_time_step(world, schedule, action, ticks.append)
    return EpisodeStats.from_run(0, ticks, world.exits)


def load_dqn_params(path):
    if path is None:
        raise FileNotFoundError("the DQN controller needs a checkpoint (--checkpoint)")
    params, _ = checkpoint.load(path)
    return params


def run_comparison_sweep(
    config: ExperimentConfig,
    controllers=(ControllerKind.DQN, ControllerKind.LONGEST_QUEUE_FIRST, ControllerKind.FIXED_TIME),
    rhos=None,
    seeds=None,
    filename: str = "comparison.csv",
) -> tuple[Path, list[dict]]:
    """Evaluate each controller at each demand level on the same traffic seeds.

    DQN runs greedily from ``config.checkpoint``. Writes one row per
    (controller, rho, seed) to ``<out>/<filename>``.
    """
    controllers = [ControllerKind(c) for c in controllers]
    rhos = tuple(config.rho_grid if rhos is None else rhos)
    seeds = tuple(config.eval_seeds if seeds is None else seeds)
    params = load_dqn_params(config.checkpoint) if ControllerKind.DQN in controllers else None
    out = Path(config.out)
    ensure_writable(out)
    h = config.hyper

    rows = []
    for kind in controllers:
        ctrl = make_controller(kind, params)
        for rho in rhos:
            for seed in seeds:
                stats = evaluate_controller(ctrl, rho, seed, h.episode_length, h.tau_g, h.tau_y)
                rows.append(
                    {
                        "controller": kind.value,
                        "rho": rho,
                        "seed": seed,
                        "mean_staying_sum_s": stats.mean_staying_sum,
                        **{f"delay_road{r}_s": stats.mean_delay[r] for r in range(N_ROADS)},
                        **{f"exits_road{r}": stats.exits[r] for r in range(N_ROADS)},
                    }
                )
                log.info("%s rho=%s seed=%s delays=%s", kind.value, rho, seed, stats.mean_delay)

    path = out / filename
    meta = {
        "checkpoint": config.checkpoint,
        "episode_length": h.episode_length,
        "seeds": ",".join(map(str, seeds)),
        "tau_g": h.tau_g,
        "tau_y": h.tau_y,
    }
    with open(path, "w", newline="") as fh:
        fh.write(_header_line("comparison", meta))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARISON_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in COMPARISON_COLUMNS])
    return path, rows


def parse_value(x) -> float:
    """A numeric CSV cell, with the missing marker read back as NaN."""
    return math.nan if x == MISSING else float(x)


def mean_delays(rows, controller: str, rho: float) -> np.ndarray:
    """Per-road delay averaged over seeds for one (controller, rho) cell.

    Accepts rows as returned by run_comparison_sweep or read back with
    read_csv; a road with no exits in some seed yields NaN.
    """
    sel = [r for r in rows if r["controller"] == controller and float(r["rho"]) == rho]
    if not sel:
        raise KeyError(f"no rows for {controller} at rho={rho}")
    return np.array([[parse_value(r[f"delay_road{k}_s"]) for k in range(N_ROADS)] for r in sel]).mean(axis=0)
