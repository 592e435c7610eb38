"""Walk through one intersection: arrivals, signals, queues and the encoded state.

Run: python3 demos/01_intersection_walkthrough.py
"""

import numpy as np

from trafficdqn.observation import encode
from trafficdqn.sim import Intersection, Phase, RouteTable, SignalSchedule, advance_signals, run_time_step

# Full demand (rho = 1). The world owns its own random stream, so the same
# seed always replays the same arrivals.
world = Intersection(RouteTable(rho=1.0), np.random.default_rng(7))
schedule = SignalSchedule(current_action=0)  # west-east green to start

# The route table: per-second arrival probability of each origin/destination pair
for route, rate in zip(world.route_table.routes, world.route_table.rates()):
    print(f"route {route.name}: road {route.origin} -> {route.destination} ({route.movement.name.lower()}), p={rate:.2f}/s")

# A switch is a 22 s transition (yellow, left green, left yellow) followed by
# 10 s of green; keeping the current action is just 10 s of green.
s = advance_signals(SignalSchedule(current_action=0), 1)
phases = []
while not s.at_decision_boundary:
    phases.append(s.phase)
    s = s.tick()
print("\nswitch WE -> NS:", [(p.name, phases.count(p)) for p in Phase if p in phases])

# Alternate the axes for two minutes and watch the intersection fill up
for action in [1, 0, 1, 0]:
    schedule, timing = run_time_step(world, schedule, action)
    print(
        f"t={world.clock:4d}s action={action} green {timing.green_start}-{timing.green_end}s "
        f"W: {timing.staying_at_green_start} -> {timing.staying_at_green_end} "
        f"(reward {timing.staying_at_green_start - timing.staying_at_green_end})"
    )

print(f"\narrived {world.arrivals}, exited {len(world.exits)}, present {world.present_count}")
for road in range(4):
    lanes = [len(lane) for lane in world.lanes[road]]
    print(f"road {road}: vehicles per lane {lanes}, waiting to turn left {len(world.waiting[road])}")

# The agent sees the last 160 m of every lane as 8 m cells: P marks occupied
# cells, V holds normalized speeds. Rows are road 0, 2, 1, 3 (four lanes each);
# column 0 touches the stop line.
obs = encode(world, schedule)
print("\nposition matrix P (# = occupied), stop line on the left:")
for row, cells in enumerate(obs.P):
    print(f"  road {(0, 2, 1, 3)[row // 4]} lane {row % 4} |" + "".join("#" if c else "." for c in cells))
print("signal vector L =", obs.L)
