"""Deep Q-learning with experience replay and a soft-updated target network."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple

import numpy as np

from .network import (
    Architecture,
    NetworkParams,
    RmsPropState,
    forward,
    forward_batch,
    init_params,
    mse_loss_and_grads,
    rmsprop_step,
)
from .observation import Observation, encode
from .sim import Intersection, SignalSchedule, StepTiming, TickRecord, run_time_step


@dataclass(frozen=True)
class Hyperparams:
    gamma: float = 0.95
    epsilon: float = 0.1
    beta: float = 0.001
    batch_size: int = 32
    lr: float = 0.0002
    rms_decay: float = 0.9
    rms_eps: float = 1e-6
    episodes: int = 2000
    episode_length: int = 5400
    tau_g: int = 10
    tau_y: int = 6
    memory_capacity: int = 108_000
    checkpoint_every: int = 50
    reward_scale: float = 1.0

    def __post_init__(self):
        checks = {
            "gamma": 0.0 <= self.gamma <= 1.0,
            "epsilon": 0.0 <= self.epsilon <= 1.0,
            "beta": 0.0 < self.beta < 1.0,
            "batch_size": self.batch_size >= 1,
            "lr": self.lr > 0.0,
            "rms_decay": 0.0 <= self.rms_decay < 1.0,
            "rms_eps": self.rms_eps > 0.0,
            "episodes": self.episodes >= 1,
            "episode_length": self.episode_length >= 1,
            "tau_g": self.tau_g >= 1,
            "tau_y": self.tau_y >= 1,
            "memory_capacity": self.memory_capacity >= 1,
            "checkpoint_every": self.checkpoint_every >= 1,
            "reward_scale": self.reward_scale > 0.0 and math.isfinite(self.reward_scale),
        }
        for name, ok in checks.items():
            if not ok:
                raise ValueError(f"{name}={getattr(self, name)!r} out of range")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


class Experience(NamedTuple):
    state: Observation
    action: int
    reward: float
    next_state: Observation
    terminal: bool


class ReplayMemory:
    """Fixed-capacity FIFO; once full, each insert evicts the oldest entry."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Experience] = []
        self._next = 0

    def __len__(self):
        return len(self._items)

    def append(self, e: Experience):
        if len(self._items) < self.capacity:
            self._items.append(e)
        else:
            self._items[self._next] = e
        self._next = (self._next + 1) % self.capacity

    def items(self) -> list[Experience]:
        """Stored experiences, oldest first."""
        if len(self._items) < self.capacity:
            return list(self._items)
        return self._items[self._next :] + self._items[: self._next]

    def sample(self, rng: np.random.Generator, n: int) -> list[Experience]:
        """Uniform draw with replacement."""
        idx = rng.integers(len(self._items), size=n)
        return [self._items[i] for i in idx]


def epsilon_greedy(q, epsilon: float, rng: np.random.Generator) -> tuple[int, bool]:
    """Return ``(action, explored)``; ties in ``q`` go to action 0."""
    if rng.random() < epsilon:
        return int(rng.integers(len(q))), True
    return int(np.argmax(q)), False


def select_action(q, epsilon: float, rng: np.random.Generator) -> int:
    return epsilon_greedy(q, epsilon, rng)[0]


def compute_reward(w_start: float, w_end: float) -> float:
    return w_start - w_end


def compute_target(e: Experience, target_params: NetworkParams, gamma: float, reward_scale: float = 1.0) -> float:
    r = reward_scale * e.reward
    if e.terminal:
        return r
    return r + gamma * float(np.max(forward(target_params, e.next_state)))


def soft_update(target_params: NetworkParams, params: NetworkParams, beta: float, inplace: bool = False) -> NetworkParams:
    """theta' <- beta * theta + (1 - beta) * theta'."""
    out = target_params if inplace else target_params.copy()
    for k, v in out.arrays.items():
        v *= 1.0 - beta
        v += beta * params[k]
    return out


def _stack(observations):
    return (
        np.stack([o.P for o in observations]),
        np.stack([o.V for o in observations]),
        np.stack([o.L for o in observations]),
    )


def batch_targets(batch, target_params: NetworkParams, gamma: float, reward_scale: float = 1.0) -> np.ndarray:
    """Vectorized compute_target over a list of experiences."""
    rewards = reward_scale * np.array([e.reward for e in batch], dtype=np.float64)
    live = np.array([not e.terminal for e in batch])
    if not live.any():
        return rewards
    q_next, _ = forward_batch(target_params, *_stack([e.next_state for e, ok in zip(batch, live) if ok]))
    targets = rewards.copy()
    targets[live] += gamma * q_next.max(axis=1)
    return targets


def train_step(memory, params, target_params, opt_state, rng, hyper: Hyperparams, inplace: bool = False):
    """Replay one minibatch, take an RMSProp step, then soft-update the target.

    With fewer than ``batch_size`` stored experiences nothing changes.
    Returns ``(params, target_params, loss)``; ``loss`` is None when skipped.
    ``inplace`` overwrites the given parameter arrays instead of copying.
    """
    if len(memory) < hyper.batch_size:
        return params, target_params, None
    batch = memory.sample(rng, hyper.batch_size)
    targets = batch_targets(batch, target_params, hyper.gamma, hyper.reward_scale)
    P, V, L = _stack([e.state for e in batch])
    actions = np.array([e.action for e in batch])
    loss, grads = mse_loss_and_grads(params, P, V, L, actions, targets)
    params = rmsprop_step(params, grads, opt_state, inplace)
    target_params = soft_update(target_params, params, hyper.beta, inplace)
    return params, target_params, loss


class StepTrace(NamedTuple):
    timing: StepTiming
    action: int
    reward: float
    q: tuple[float, float]
    explored: bool


@dataclass
class EpisodeTrace:
    ticks: list[TickRecord] = field(default_factory=list)
    steps: list[StepTrace] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)


class DQNAgent:
    """Owns the online/target networks, optimizer state and replay memory."""

    def __init__(self, hyper: Hyperparams, seed: int, arch: Architecture = Architecture(), params=None):
        self.hyper = hyper
        self.seed = seed
        init_rng, self.rng = (np.random.default_rng(s) for s in np.random.SeedSequence([seed, 1]).spawn(2))
        self.params = params if params is not None else init_params(init_rng, arch)
        self.target_params = self.params.copy()
        self.opt_state = RmsPropState.for_params(self.params, hyper.lr, hyper.rms_decay, hyper.rms_eps)
        self.memory = ReplayMemory(hyper.memory_capacity)

    def greedy_action(self, obs: Observation) -> int:
        return int(np.argmax(forward(self.params, obs)))

    def run_episode(self, world: Intersection, initial_action: int = 0, learn: bool = True) -> EpisodeTrace:
        """Play one episode; with ``learn`` store experiences and train every step.

        The episode ends at the first decision boundary with
        ``world.clock >= episode_length``; that last experience is terminal.
        """
        h = self.hyper
        trace = EpisodeTrace()
        schedule = SignalSchedule(current_action=initial_action, tau_g=h.tau_g, tau_y=h.tau_y)
        epsilon = h.epsilon if learn else 0.0
        obs = encode(world, schedule)
        while world.clock < h.episode_length:
            q = forward(self.params, obs)
            action, explored = epsilon_greedy(q, epsilon, self.rng)
            schedule, timing = run_time_step(world, schedule, action, trace.ticks.append)
            reward = compute_reward(timing.staying_at_green_start, timing.staying_at_green_end)
            next_obs = encode(world, schedule)
            trace.steps.append(StepTrace(timing, action, reward, (float(q[0]), float(q[1])), explored))
            if learn:
                terminal = world.clock >= h.episode_length
                self.memory.append(Experience(obs, action, reward, next_obs, terminal))
                self.params, self.target_params, loss = train_step(
                    self.memory, self.params, self.target_params, self.opt_state, self.rng, h, inplace=True
                )
                if loss is not None:
                    trace.losses.append(loss)
            obs = next_obs
        return trace


def run_episode_training(world: Intersection, agent: DQNAgent, initial_action: int = 0) -> EpisodeTrace:
    return agent.run_episode(world, initial_action, learn=True)
