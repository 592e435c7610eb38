"""Signal controllers sharing one decision interface.

A controller is called at every decision boundary with the world, the
signal schedule and the clock, and returns the action for the next time
step. Every controller actuates through the same SignalSchedule, so green,
yellow and transition timings are identical across them.
"""

from __future__ import annotations

import enum

import numpy as np

from .network import NetworkParams, forward
from .observation import SEGMENT_LENGTH, encode
from .sim import ROAD_AXIS, ROAD_LENGTH, Intersection, SignalSchedule

HALTED_SPEED = 0.1


class ControllerKind(enum.Enum):
    DQN = "dqn"
    FIXED_TIME = "fixed"
    LONGEST_QUEUE_FIRST = "lqf"


def fixed_time_decide(prev_action: int) -> int:
    return 1 - prev_action


def queue_lengths(world: Intersection) -> tuple[int, int]:
    """Halted vehicles within the observed segment, per axis (WE, NS)."""
    counts = [0, 0]
    horizon = ROAD_LENGTH - SEGMENT_LENGTH
    for road, lanes in enumerate(world.lanes):
        axis = ROAD_AXIS[road]
        for lane in lanes:
            for v in lane:
                if v.pos <= horizon:
                    break
                if v.speed < HALTED_SPEED:
                    counts[axis] += 1
    return counts[0], counts[1]


def longest_queue_decide(world: Intersection, prev_action: int) -> int:
    we, ns = queue_lengths(world)
    if we == ns:
        return prev_action
    return 0 if we > ns else 1


class FixedTimeController:
    kind = ControllerKind.FIXED_TIME

    def __call__(self, world: Intersection, schedule: SignalSchedule, clock: int) -> int:
        return fixed_time_decide(schedule.current_action)


class LongestQueueController:
    kind = ControllerKind.LONGEST_QUEUE_FIRST

    def __call__(self, world: Intersection, schedule: SignalSchedule, clock: int) -> int:
        return longest_queue_decide(world, schedule.current_action)


class GreedyDQNController:
    """Pure exploitation of a frozen Q-network; never learns."""

    kind = ControllerKind.DQN

    def __init__(self, params: NetworkParams):
        self.params = params

    def __call__(self, world: Intersection, schedule: SignalSchedule, clock: int) -> int:
        return int(np.argmax(forward(self.params, encode(world, schedule))))


def make_controller(kind: ControllerKind | str, params: NetworkParams | None = None):
    kind = ControllerKind(kind)
    if kind is ControllerKind.FIXED_TIME:
        return FixedTimeController()
    if kind is ControllerKind.LONGEST_QUEUE_FIRST:
        return LongestQueueController()
    if params is None:
        raise ValueError("the DQN controller needs trained parameters")
    return GreedyDQNController(params)
