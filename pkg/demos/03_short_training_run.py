"""Train a DQN controller briefly, then compare it with the two baselines.

This is a scaled-down run (a few minutes at most); the acceptance suite's
desk-scale run is 300 episodes of 30 simulated minutes each.

Run: python3 demos/03_short_training_run.py [episodes]
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from trafficdqn.config import parse_config, replace
from trafficdqn.experiment import mean_delays, read_csv, run_comparison_sweep, run_training_experiment

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 20
out = Path(tempfile.mkdtemp(prefix="trafficdqn-demo-"))

# Desk-scale settings, cut down to a handful of 15-minute episodes
config = parse_config(None, {"seed": 1, "out": out}, desk_scale=True)
config = replace(config, episodes=episodes, episode_length=900, checkpoint_every=5)


def progress(stats):
    delays = ", ".join("  NA " if np.isnan(d) else f"{d:5.1f}" for d in stats.mean_delay)
    print(f"episode {stats.episode:3d}: mean staying sum {stats.mean_staying_sum:7.1f} s, delay per road [{delays}] s")


curve, history = run_training_experiment(config, progress)
print(f"\ntraining curve written to {curve}")
print(read_csv(curve)[-1])

# Greedy evaluation of the final network against fixed-time and
# longest-queue-first on the same arrival streams
config = replace(config, checkpoint=out / "final.ckpt")
path, rows = run_comparison_sweep(config, rhos=[1.0], seeds=(1001, 1002))
print(f"\ncomparison at rho=1 ({path}):")
for controller in ("dqn", "lqf", "fixed"):
    d = mean_delays(rows, controller, 1.0)
    print(f"  {controller:5s} mean delay per road: {np.round(d, 1)}")
