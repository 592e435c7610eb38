"""The Q-network by hand: shapes, a forward pass, a gradient check, one RMSProp step.

Run: python3 demos/02_network_and_gradients.py
"""

import numpy as np

from trafficdqn.network import Architecture, RmsPropState, forward, init_params, mse_loss_and_grads, rmsprop_step
from trafficdqn.observation import Observation

arch = Architecture()
(c1, c2) = arch.conv_output_shapes()
print(f"input {arch.input_shape} -> conv1 {c1} -> conv2 {c2} per branch")
print(f"two branches flattened + 2 signal inputs = {arch.concat_width} -> {arch.hidden} -> {arch.n_actions}")

rng = np.random.default_rng(0)
params = init_params(rng)
print(f"{params.size():,} parameters, Glorot-uniform weights, zero biases")

# A random sparse traffic picture
P = (rng.random((16, 20)) < 0.2).astype(float)
V = P * rng.random((16, 20))
obs = Observation(P, V, np.array([1.0, 0.0]))
print("Q(s, .) =", forward(params, obs))

# Gradient check on a tiny network: analytic backprop vs central differences
small = Architecture(input_shape=(4, 5), conv1=(2, 2, 1), conv2=(2, 2, 1), hidden=(8, 6))
sp = init_params(rng, small)
Ps = (rng.random((3, 4, 5)) < 0.5).astype(float)
Vs = Ps * rng.random((3, 4, 5))
Ls = np.eye(2)[[0, 1, 1]]
actions, targets = np.array([0, 1, 0]), np.array([1.0, -0.5, 2.0])
_, grads = mse_loss_and_grads(sp, Ps, Vs, Ls, actions, targets)

h, worst = 1e-5, 0.0
for name, arr in sp.arrays.items():
    for idx in np.ndindex(arr.shape):
        orig = arr[idx]
        arr[idx] = orig + h
        up, _ = mse_loss_and_grads(sp, Ps, Vs, Ls, actions, targets)
        arr[idx] = orig - h
        down, _ = mse_loss_and_grads(sp, Ps, Vs, Ls, actions, targets)
        arr[idx] = orig
        numeric = (up - down) / (2 * h)
        worst = max(worst, abs(numeric - grads[name][idx]) / max(abs(numeric), abs(grads[name][idx]), 1e-6))
print(f"gradient check on {sp.size()} parameters: max relative error {worst:.1e}")

# RMSProp: with a constant gradient the step settles at the learning rate
state = RmsPropState.for_params(sp)
ones = {k: np.ones_like(v) for k, v in sp.arrays.items()}
for step in range(1, 31):
    before = sp["out_b"][0]
    sp = rmsprop_step(sp, ones, state, inplace=True)
    if step in (1, 5, 30):
        print(f"rmsprop step {step:2d}: moved {before - sp['out_b'][0]:.6f} (lr {state.lr})")
