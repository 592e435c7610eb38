"""Raw-state encoding of the intersection into position/speed matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import N_LANES, ROAD_LENGTH, SPEED_LIMIT, Intersection, SignalSchedule

SEGMENT_LENGTH = 160.0
CELL_LENGTH = 8.0
N_CELLS = int(SEGMENT_LENGTH // CELL_LENGTH)

# rows are stacked road 0, road 2, road 1, road 3 (west-east axis first)
ROAD_ROW_ORDER = (0, 2, 1, 3)
ROAD_ROW_OFFSET = {road: i * N_LANES for i, road in enumerate(ROAD_ROW_ORDER)}
N_ROWS = 4 * N_LANES


@dataclass(frozen=True)
class Observation:
    """Network input: position matrix, normalized speed matrix, signal one-hot."""

    P: np.ndarray
    V: np.ndarray
    L: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return (
            np.array_equal(self.P, other.P)
            and np.array_equal(self.V, other.V)
            and np.array_equal(self.L, other.L)
        )

    __hash__ = None


def cell_of(pos: float) -> int | None:
    """Cell holding a front bumper at ``pos``; cell 0 touches the stop line."""
    dist = ROAD_LENGTH - pos
    if dist < 0.0 or dist >= SEGMENT_LENGTH:
        return None
    return int(dist // CELL_LENGTH)


def encode(world: Intersection, schedule: SignalSchedule) -> Observation:
    """Encode vehicles within SEGMENT_LENGTH of each stop line.

    Each vehicle marks the cell containing its front bumper. Queued vehicles
    sit 7.5 m apart, closer than one 8 m cell, so two fronts can share a
    cell; the vehicle nearer the stop line then owns the speed entry.
    Left-turners already in the waiting area are not part of any approach
    segment and are left out.
    """
    P = np.zeros((N_ROWS, N_CELLS))
    V = np.zeros((N_ROWS, N_CELLS))
    for road, offset in ROAD_ROW_OFFSET.items():
        for lane_idx, lane in enumerate(world.lanes[road]):
            row = offset + lane_idx
            for v in lane:
                c = cell_of(v.pos)
                if c is None:
                    # lanes are ordered front first
                    break
                if P[row, c] == 0.0:
                    P[row, c] = 1.0
                    V[row, c] = v.speed / SPEED_LIMIT
    L = np.zeros(2)
    L[schedule.current_action] = 1.0
    return Observation(P, V, L)
