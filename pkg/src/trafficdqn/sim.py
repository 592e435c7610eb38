"""Microscopic simulation of a single four-way, four-lane intersection.

Time advances in 1 s ticks. Each approach road is 500 m long with the stop
line at ``pos == ROAD_LENGTH``. Lane 0 carries left-turners, lanes 1-3 carry
through traffic. Roads 0 and 2 form the west-east axis (action 0), roads 1
and 3 the north-south axis (action 1).

Vehicles follow a deterministic safe-speed rule: accelerate by ``ACCEL`` up
to the speed limit, but never faster than what still allows a stop, braking
at most ``DECEL`` per second, behind the leader's stopping point or at the
stop line when the signal requires it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

ROAD_LENGTH = 500.0
SPEED_LIMIT = 19.444
VEHICLE_LENGTH = 5.0
MIN_GAP = 2.5
HEADWAY = VEHICLE_LENGTH + MIN_GAP
ACCEL = 2.6
DECEL = 4.5
TAU_G = 10
TAU_Y = 6

LEFT_AREA_CAPACITY = 2
YIELD_DISTANCE = 50.0

N_ROADS = 4
N_LANES = 4
LEFT_LANE = 0
STRAIGHT_LANES = (1, 2, 3)

# axis served by each road: 0 = west-east, 1 = north-south
ROAD_AXIS = (0, 1, 0, 1)
OPPOSITE_ROAD = (2, 3, 0, 1)


class Movement(enum.Enum):
    STRAIGHT = "straight"
    LEFT = "left"


class Route(NamedTuple):
    origin: int
    destination: int
    movement: Movement
    probability: float

    @property
    def name(self) -> str:
        return f"{self.origin}{self.destination}"


BASE_ROUTES = (
    Route(0, 6, Movement.STRAIGHT, 1 / 5),
    Route(0, 7, Movement.LEFT, 1 / 20),
    Route(2, 4, Movement.STRAIGHT, 1 / 5),
    Route(2, 5, Movement.LEFT, 1 / 20),
    Route(3, 5, Movement.STRAIGHT, 1 / 10),
    Route(3, 6, Movement.LEFT, 1 / 20),
    Route(1, 7, Movement.STRAIGHT, 1 / 10),
    Route(1, 4, Movement.LEFT, 1 / 20),
)


@dataclass(frozen=True)
class RouteTable:
    """The eight routes with their per-second Bernoulli arrival probabilities.

    ``rho`` scales every probability; ``rho == 0`` switches demand off, which
    is useful in tests even though experiments keep ``rho`` in [0.1, 1].
    """

    routes: tuple[Route, ...] = BASE_ROUTES
    rho: float = 1.0

    def __post_init__(self):
        if len(self.routes) != 8:
            raise ValueError(f"expected 8 routes, got {len(self.routes)}")
        if {r.name for r in self.routes} != {r.name for r in BASE_ROUTES}:
            raise ValueError("route set differs from the intersection's eight routes")
        for r in self.routes:
            if not 0.0 <= r.probability <= 1.0:
                raise ValueError(f"route {r.name}: probability {r.probability} outside [0, 1]")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho={self.rho} outside [0, 1]")

    def rates(self) -> np.ndarray:
        return np.array([self.rho * r.probability for r in self.routes])


# --------------------------------------------------------------------------
# signals


class Phase(enum.Enum):
    GREEN = "green"
    YELLOW_STRAIGHT = "yellow_straight"
    LEFT_GREEN = "left_green"
    LEFT_YELLOW = "left_yellow"


class Light(enum.Enum):
    RED = "r"
    YELLOW = "y"
    GREEN = "G"
    # left-turners may pull into the waiting area but must yield
    PERMISSIVE = "g"


_NEXT_PHASE = {
    Phase.YELLOW_STRAIGHT: Phase.LEFT_GREEN,
    Phase.LEFT_GREEN: Phase.LEFT_YELLOW,
    Phase.LEFT_YELLOW: Phase.GREEN,
}


@dataclass(frozen=True)
class SignalSchedule:
    """Phase machine for the two signal axes.

    ``current_action`` is the axis whose green is running or pending. While
    a transition runs, the indications belong to the *previous* axis
    (``1 - current_action``); the new axis stays red until its green.
    """

    current_action: int = 0
    phase: Phase = Phase.GREEN
    phase_remaining: int = 0
    tau_g: int = TAU_G
    tau_y: int = TAU_Y

    @property
    def at_decision_boundary(self) -> bool:
        return self.phase is Phase.GREEN and self.phase_remaining == 0

    @property
    def active_axis(self) -> int:
        if self.phase is Phase.GREEN:
            return self.current_action
        return 1 - self.current_action

    def lights(self, axis: int) -> tuple[Light, Light]:
        """(straight, left) indications shown to ``axis`` during this second."""
        if axis != self.active_axis:
            return Light.RED, Light.RED
        if self.phase is Phase.GREEN:
            return Light.GREEN, Light.PERMISSIVE
        if self.phase is Phase.YELLOW_STRAIGHT:
            return Light.YELLOW, Light.PERMISSIVE
        if self.phase is Phase.LEFT_GREEN:
            return Light.RED, Light.GREEN
        return Light.RED, Light.YELLOW

    def tick(self) -> SignalSchedule:
        """Consume one second of the current phase."""
        assert not self.at_decision_boundary, "no action chosen for the next green interval"
        remaining = self.phase_remaining - 1
        if remaining > 0 or self.phase is Phase.GREEN:
            return replace(self, phase_remaining=remaining)
        nxt = _NEXT_PHASE[self.phase]
        duration = self.tau_y if nxt is Phase.LEFT_YELLOW else self.tau_g
        return replace(self, phase=nxt, phase_remaining=duration)


def advance_signals(schedule: SignalSchedule, chosen_action: int) -> SignalSchedule:
    """Schedule the next time step once a green interval has ended.

    Keeping the action gives another green of ``tau_g`` seconds. Switching
    first runs yellow, left-green and left-yellow for the old axis, so the
    time step lasts ``tau_y + tau_g + tau_y + tau_g`` seconds.
    """
    assert schedule.at_decision_boundary, "advance_signals called mid-phase"
    assert chosen_action in (0, 1)
    if chosen_action == schedule.current_action:
        return replace(schedule, phase=Phase.GREEN, phase_remaining=schedule.tau_g)
    return replace(
        schedule,
        current_action=chosen_action,
        phase=Phase.YELLOW_STRAIGHT,
        phase_remaining=schedule.tau_y,
    )


def step_length(schedule: SignalSchedule, chosen_action: int) -> int:
    if chosen_action == schedule.current_action:
        return schedule.tau_g
    return 2 * schedule.tau_y + 2 * schedule.tau_g


# --------------------------------------------------------------------------
# kinematics


def stopping_distance(v: float) -> float:
    """Distance covered when braking by DECEL every following second."""
    n = math.floor(v / DECEL)
    return n * v - DECEL * n * (n + 1) / 2


def max_safe_speed(budget: float) -> float:
    """Largest speed ``u`` for this tick with ``u + stopping_distance(u) <= budget``.

    ``u + stopping_distance(u)`` is piecewise linear and increasing with
    breakpoints ``DECEL * n * (n + 1) / 2`` at ``u = n * DECEL``.
    """
    if budget <= 0.0:
        return 0.0
    n = math.floor((math.sqrt(1.0 + 8.0 * budget / DECEL) - 1.0) / 2.0)
    # guard the float floor at exact breakpoints
    while DECEL * (n + 1) * (n + 2) / 2 <= budget:
        n += 1
    while n > 0 and DECEL * n * (n + 1) / 2 > budget:
        n -= 1
    return (budget + DECEL * n * (n + 1) / 2) / (n + 1)


# --------------------------------------------------------------------------
# world


class Vehicle:
    __slots__ = ("id", "route", "road", "lane", "pos", "speed", "entry_time")

    def __init__(self, id, route, road, lane, pos, speed, entry_time):
        self.id = id
        self.route = route
        self.road = road
        self.lane = lane
        self.pos = pos
        self.speed = speed
        self.entry_time = entry_time

    def __repr__(self):
        return (
            f"Vehicle(id={self.id}, route={self.route}, road={self.road}, lane={self.lane}, "
            f"pos={self.pos:.3f}, speed={self.speed:.3f}, entry_time={self.entry_time})"
        )


class ExitRecord(NamedTuple):
    id: int
    road: int
    entry_time: int
    exit_time: int
    delay: int


class TickRecord(NamedTuple):
    clock: int
    staying_sum: int


@dataclass
class Intersection:
    """Mutable world state: vehicles on the four approaches plus bookkeeping.

    ``lanes[road][lane]`` lists vehicles front first (decreasing ``pos``).
    ``waiting[road]`` is the left-turn waiting area past the stop line.
    """

    route_table: RouteTable = field(default_factory=RouteTable)
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    clock: int = 0
    lanes: list = field(default_factory=lambda: [[[] for _ in range(N_LANES)] for _ in range(N_ROADS)])
    waiting: list = field(default_factory=lambda: [[] for _ in range(N_ROADS)])
    pending: list = field(default_factory=lambda: [[[] for _ in range(N_LANES)] for _ in range(N_ROADS)])
    next_id: int = 0
    arrivals: int = 0
    exits: list = field(default_factory=list)

    def vehicles(self):
        """All vehicles still at the intersection (approaches and waiting areas)."""
        for road in range(N_ROADS):
            for lane in self.lanes[road]:
                yield from lane
            yield from self.waiting[road]

    def approach_vehicles(self):
        for road in range(N_ROADS):
            for lane in self.lanes[road]:
                yield from lane

    @property
    def present_count(self) -> int:
        return sum(len(lane) for road in self.lanes for lane in road) + sum(
            len(w) for w in self.waiting
        )

    @property
    def deferred_count(self) -> int:
        return sum(len(q) for road in self.pending for q in road)

    def staying_time_sum(self, clock: int | None = None) -> int:
        return staying_time_sum(self, self.clock if clock is None else clock)

    def tick(self, schedule: SignalSchedule) -> TickRecord:
        """Spawn arrivals for this second, move vehicles, then advance the clock."""
        spawn_arrivals(self, self.route_table, self.rng, self.clock)
        step_vehicles(self, schedule)
        self.clock += 1
        return TickRecord(self.clock, staying_time_sum(self, self.clock))


def _entrance_free(lane: list) -> bool:
    return not lane or lane[-1].pos >= HEADWAY


def spawn_arrivals(world: Intersection, route_table: RouteTable, rng: np.random.Generator, clock: int):
    """Bernoulli arrivals for one second; returns the vehicles placed on a road.

    Every route draws one uniform per second, so the random stream consumed
    per tick does not depend on traffic. A through vehicle also draws its
    lane. Arrivals whose lane entrance is occupied wait in ``world.pending``
    and are retried first on later seconds; they are never dropped.
    """
    draws = rng.random(len(route_table.routes))
    rates = route_table.rates()
    for route, u, p in zip(route_table.routes, draws, rates):
        if u < p:
            if route.movement is Movement.LEFT:
                lane = LEFT_LANE
            else:
                lane = STRAIGHT_LANES[int(rng.integers(len(STRAIGHT_LANES)))]
            world.pending[route.origin][lane].append(route)

    placed = []
    for road in range(N_ROADS):
        for lane_idx in range(N_LANES):
            queue = world.pending[road][lane_idx]
            lane = world.lanes[road][lane_idx]
            if queue and _entrance_free(lane):
                route = queue.pop(0)
                speed = SPEED_LIMIT
                if lane:
                    leader = lane[-1]
                    budget = leader.pos - HEADWAY + stopping_distance(leader.speed)
                    speed = min(speed, max_safe_speed(budget), leader.pos - HEADWAY)
                v = Vehicle(world.next_id, route.name, road, lane_idx, 0.0, speed, clock)
                world.next_id += 1
                world.arrivals += 1
                lane.append(v)
                placed.append(v)
    return placed


def _oncoming_straight_moving(world: Intersection, road: int) -> bool:
    opp = world.lanes[OPPOSITE_ROAD[road]]
    limit = ROAD_LENGTH - YIELD_DISTANCE
    for lane_idx in STRAIGHT_LANES:
        for v in opp[lane_idx]:
            if v.pos < limit:
                break
            if v.speed > 0.0:
                return True
    return False


def _must_stop(light: Light, pos: float, speed: float) -> bool:
    if light is Light.RED:
        return True
    if light is Light.YELLOW:
        return pos + stopping_distance(speed) <= ROAD_LENGTH
    return False


def step_vehicles(world: Intersection, schedule: SignalSchedule):
    """Move every vehicle by one second under the indications of ``schedule``.

    Waiting-area left-turners are handled first (at most one crosses per road
    per second): during the permissive phases they need no oncoming through
    vehicle moving within YIELD_DISTANCE of its stop line; during left-green
    and left-yellow they cross unconditionally. Approach vehicles then move
    front to back. The braking bound uses the leader's state at the start
    of the tick, which gives queues a one-second start-up wave per vehicle;
    a hard cap on the leader's new position keeps the minimum gap exact. Exit
    records are appended to ``world.exits``.
    """
    exit_time = world.clock + 1
    exits = world.exits

    for road in range(N_ROADS):
        area = world.waiting[road]
        if not area:
            continue
        _, left = schedule.lights(ROAD_AXIS[road])
        if left is Light.RED:
            continue
        if left is Light.PERMISSIVE and _oncoming_straight_moving(world, road):
            continue
        v = area.pop(0)
        exits.append(ExitRecord(v.id, road, v.entry_time, exit_time, exit_time - v.entry_time))

    for road in range(N_ROADS):
        straight_light, left_light = schedule.lights(ROAD_AXIS[road])
        area = world.waiting[road]
        for lane_idx in range(N_LANES):
            lane = world.lanes[road][lane_idx]
            if not lane:
                continue
            light = left_light if lane_idx == LEFT_LANE else straight_light
            kept = []
            # leader state at the start of the tick, and its position after it
            lead_pos = lead_speed = None
            lead_new_pos = None
            for v in lane:
                x, speed = v.pos, v.speed
                new_speed = min(speed + ACCEL, SPEED_LIMIT)
                if lead_pos is not None:
                    budget = lead_pos - HEADWAY + stopping_distance(lead_speed) - x
                    new_speed = min(new_speed, max_safe_speed(budget))
                if lead_new_pos is not None:
                    new_speed = min(new_speed, lead_new_pos - HEADWAY - x)
                else:
                    stop = _must_stop(light, x, speed)
                    if not stop and light is Light.PERMISSIVE:
                        stop = len(area) >= LEFT_AREA_CAPACITY
                    if stop:
                        gap = ROAD_LENGTH - x
                        new_speed = min(new_speed, max_safe_speed(gap), gap)
                if new_speed < 0.0:
                    new_speed = 0.0
                new_pos = x + new_speed
                lead_pos, lead_speed = x, speed
                v.speed = new_speed
                if new_pos > ROAD_LENGTH:
                    # crossed the stop line with permission
                    if light is Light.PERMISSIVE:
                        v.pos = ROAD_LENGTH
                        area.append(v)
                    else:
                        exits.append(
                            ExitRecord(v.id, road, v.entry_time, exit_time, exit_time - v.entry_time)
                        )
                    lead_new_pos = None
                    continue
                v.pos = new_pos
                lead_new_pos = new_pos
                kept.append(v)
            world.lanes[road][lane_idx] = kept


def staying_time_sum(world: Intersection, clock: int) -> int:
    """Sum of ``clock - entry_time`` over vehicles still at the intersection."""
    return sum(clock - v.entry_time for v in world.vehicles())


def check_invariants(world: Intersection):
    """Raise AssertionError if lane ordering, gap or speed bounds are violated."""
    for road in range(N_ROADS):
        for lane in world.lanes[road]:
            for v in lane:
                assert 0.0 <= v.pos <= ROAD_LENGTH, v
                assert 0.0 <= v.speed <= SPEED_LIMIT, v
            for lead, follow in zip(lane, lane[1:]):
                assert lead.pos - follow.pos >= HEADWAY - 1e-9, (lead, follow)
        assert len(world.waiting[road]) <= LEFT_AREA_CAPACITY


class StepTiming(NamedTuple):
    """Clock positions of one agent time step and the staying sums observed."""

    decision_clock: int
    green_start: int
    green_end: int
    staying_at_green_start: int
    staying_at_green_end: int


def run_time_step(world: Intersection, schedule: SignalSchedule, action: int, sink=None):
    """Actuate ``action`` and simulate until its green interval ends.

    ``sink`` receives every TickRecord. Returns the schedule at the next
    decision boundary and a StepTiming.
    """
    decision_clock = world.clock
    schedule = advance_signals(schedule, action)
    while schedule.phase is not Phase.GREEN:
        rec = world.tick(schedule)
        if sink is not None:
            sink(rec)
        schedule = schedule.tick()
    green_start = world.clock
    w_start = world.staying_time_sum()
    while not schedule.at_decision_boundary:
        rec = world.tick(schedule)
        if sink is not None:
            sink(rec)
        schedule = schedule.tick()
    w_end = world.staying_time_sum()
    return schedule, StepTiming(decision_clock, green_start, world.clock, w_start, w_end)
