"""Two-branch convolutional Q-network written directly in numpy.

The position and speed matrices each pass through their own stack of two
valid convolutions with ReLU. The flattened branch outputs are concatenated
with the signal vector and fed through two ReLU fully connected layers and
a linear output layer with one unit per action.

All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class Architecture:
    input_shape: tuple[int, int] = (16, 20)
    conv1: tuple[int, int, int] = (16, 4, 2)  # filters, kernel, stride
    conv2: tuple[int, int, int] = (32, 2, 1)
    hidden: tuple[int, int] = (128, 64)
    signal_size: int = 2
    n_actions: int = 2

    def conv_output_shapes(self) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
        h, w = self.input_shape
        f1, k1, s1 = self.conv1
        h1, w1 = (h - k1) // s1 + 1, (w - k1) // s1 + 1
        f2, k2, s2 = self.conv2
        h2, w2 = (h1 - k2) // s2 + 1, (w1 - k2) // s2 + 1
        return (f1, h1, w1), (f2, h2, w2)

    @property
    def concat_width(self) -> int:
        _, (f2, h2, w2) = self.conv_output_shapes()
        return 2 * f2 * h2 * w2 + self.signal_size

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        (f1, h1, w1), (f2, h2, w2) = self.conv_output_shapes()
        if min(h1, w1, h2, w2) < 1:
            raise ValueError(f"input {self.input_shape} too small for {self}")
        k1, k2 = self.conv1[1], self.conv2[1]
        n1, n2 = self.hidden
        shapes = {}
        for branch in ("p", "v"):
            shapes[f"{branch}_conv1_w"] = (f1, 1, k1, k1)
            shapes[f"{branch}_conv1_b"] = (f1,)
            shapes[f"{branch}_conv2_w"] = (f2, f1, k2, k2)
            shapes[f"{branch}_conv2_b"] = (f2,)
        shapes["fc1_w"] = (self.concat_width, n1)
        shapes["fc1_b"] = (n1,)
        shapes["fc2_w"] = (n1, n2)
        shapes["fc2_b"] = (n2,)
        shapes["out_w"] = (n2, self.n_actions)
        shapes["out_b"] = (self.n_actions,)
        return shapes


@dataclass
class NetworkParams:
    """Weights and biases keyed by layer name, in layer order."""

    arch: Architecture
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        shapes = self.arch.param_shapes()
        if list(self.arrays) != list(shapes):
            raise ValueError(f"parameter names {list(self.arrays)} != {list(shapes)}")
        for name, shape in shapes.items():
            if self.arrays[name].shape != shape:
                raise ValueError(f"{name}: shape {self.arrays[name].shape} != {shape}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def copy(self) -> NetworkParams:
        return NetworkParams(self.arch, {k: v.copy() for k, v in self.arrays.items()})

    def map(self, fn) -> NetworkParams:
        return NetworkParams(self.arch, {k: fn(v) for k, v in self.arrays.items()})

    def size(self) -> int:
        return sum(v.size for v in self.arrays.values())


def zeros(arch: Architecture = Architecture()) -> NetworkParams:
    return NetworkParams(arch, {k: np.zeros(s) for k, s in arch.param_shapes().items()})


def init_params(rng: np.random.Generator, arch: Architecture = Architecture()) -> NetworkParams:
    """Glorot-uniform weights, zero biases."""
    arrays = {}
    for name, shape in arch.param_shapes().items():
        if name.endswith("_b"):
            arrays[name] = np.zeros(shape)
            continue
        arrays[name] = rng.uniform(-1.0, 1.0, size=shape) * glorot_bound(shape)
    return NetworkParams(arch, arrays)


def glorot_bound(shape: tuple[int, ...]) -> float:
    if len(shape) == 4:
        receptive = shape[2] * shape[3]
        fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
    else:
        fan_in, fan_out = shape
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


# --------------------------------------------------------------------------
# layers


def conv_forward(x, w, b, stride):
    """Valid cross-correlation. x: (B, C, H, W), w: (F, C, k, k) -> (B, F, Ho, Wo).

    Also returns the im2col matrix of shape (B * Ho * Wo, C * k * k).
    """
    n, c = x.shape[:2]
    f, _, k, _ = w.shape
    windows = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = windows.shape[2], windows.shape[3]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    out = cols @ w.reshape(f, -1).T + b
    return out.reshape(n, ho, wo, f).transpose(0, 3, 1, 2), cols


def conv_backward(dout, x, cols, w, stride, need_dx=True):
    f, c, k, _ = w.shape
    dout_rows = dout.transpose(0, 2, 3, 1).reshape(-1, f)
    dw = (dout_rows.T @ cols).reshape(w.shape)
    db = dout_rows.sum(axis=0)
    if not need_dx:
        return None, dw, db
    n, _, ho, wo = dout.shape
    # (B*Ho*Wo, C, k, k)
    dcols = (dout_rows @ w.reshape(f, -1)).reshape(n, ho, wo, c, k, k)
    dx = np.zeros_like(x)
    for i in range(k):
        for j in range(k):
            dx[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride] += (
                dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    return dx, dw, db


def _branch_forward(params, prefix, x, arch):
    h1, win1 = conv_forward(x, params[f"{prefix}_conv1_w"], params[f"{prefix}_conv1_b"], arch.conv1[2])
    a1 = np.maximum(h1, 0.0)
    h2, win2 = conv_forward(a1, params[f"{prefix}_conv2_w"], params[f"{prefix}_conv2_b"], arch.conv2[2])
    a2 = np.maximum(h2, 0.0)
    return a2, (x, win1, h1, a1, win2, h2)


def _branch_backward(params, prefix, da2, cache, arch, grads):
    x, win1, h1, a1, win2, h2 = cache
    dh2 = da2 * (h2 > 0.0)
    da1, grads[f"{prefix}_conv2_w"], grads[f"{prefix}_conv2_b"] = conv_backward(
        dh2, a1, win2, params[f"{prefix}_conv2_w"], arch.conv2[2]
    )
    dh1 = da1 * (h1 > 0.0)
    _, grads[f"{prefix}_conv1_w"], grads[f"{prefix}_conv1_b"] = conv_backward(
        dh1, x, win1, params[f"{prefix}_conv1_w"], arch.conv1[2], need_dx=False
    )


def forward_batch(params: NetworkParams, P, V, L):
    """Q-values for a batch. P, V: (B, H, W); L: (B, signal_size).

    Returns ``(q, cache)`` with ``q`` of shape (B, n_actions).
    """
    arch = params.arch
    P = np.asarray(P, dtype=np.float64)[:, None]
    V = np.asarray(V, dtype=np.float64)[:, None]
    L = np.asarray(L, dtype=np.float64)
    ap, cache_p = _branch_forward(params, "p", P, arch)
    av, cache_v = _branch_forward(params, "v", V, arch)
    n = ap.shape[0]
    z = np.concatenate([ap.reshape(n, -1), av.reshape(n, -1), L], axis=1)
    h3 = z @ params["fc1_w"] + params["fc1_b"]
    a3 = np.maximum(h3, 0.0)
    h4 = a3 @ params["fc2_w"] + params["fc2_b"]
    a4 = np.maximum(h4, 0.0)
    q = a4 @ params["out_w"] + params["out_b"]
    return q, (cache_p, cache_v, ap.shape, z, h3, a3, h4, a4)


def backward_batch(params: NetworkParams, cache, dq) -> dict[str, np.ndarray]:
    """Gradients of ``sum(dq * q)`` with respect to every parameter."""
    arch = params.arch
    cache_p, cache_v, branch_shape, z, h3, a3, h4, a4 = cache
    grads = {}
    grads["out_w"] = a4.T @ dq
    grads["out_b"] = dq.sum(axis=0)
    dh4 = (dq @ params["out_w"].T) * (h4 > 0.0)
    grads["fc2_w"] = a3.T @ dh4
    grads["fc2_b"] = dh4.sum(axis=0)
    dh3 = (dh4 @ params["fc2_w"].T) * (h3 > 0.0)
    grads["fc1_w"] = z.T @ dh3
    grads["fc1_b"] = dh3.sum(axis=0)
    dz = dh3 @ params["fc1_w"].T
    width = int(np.prod(branch_shape[1:]))
    _branch_backward(params, "p", dz[:, :width].reshape(branch_shape), cache_p, arch, grads)
    _branch_backward(params, "v", dz[:, width : 2 * width].reshape(branch_shape), cache_v, arch, grads)
    return {name: grads[name] for name in params.arrays}


def forward(params: NetworkParams, obs) -> np.ndarray:
    """Q-values of a single observation, shape (n_actions,)."""
    q, _ = forward_batch(params, obs.P[None], obs.V[None], obs.L[None])
    return q[0]


def mse_loss_and_grads(params: NetworkParams, P, V, L, actions, targets):
    """Mean over the batch of ``0.5 * (target - q[action])**2`` and its gradients.

    Only the taken action's output enters the loss.
    """
    q, cache = forward_batch(params, P, V, L)
    actions = np.asarray(actions)
    idx = np.arange(len(actions))
    residual = q[idx, actions] - np.asarray(targets, dtype=np.float64)
    n = len(actions)
    dq = np.zeros_like(q)
    dq[idx, actions] = residual / n
    loss = 0.5 * float(np.mean(residual**2))
    return loss, backward_batch(params, cache, dq)


def backward(params: NetworkParams, obs, action: int, target: float) -> dict[str, np.ndarray]:
    """Gradients of ``0.5 * (target - q[action])**2`` for one observation."""
    _, grads = mse_loss_and_grads(params, obs.P[None], obs.V[None], obs.L[None], [action], [target])
    return grads


# --------------------------------------------------------------------------
# optimizer


@dataclass
class RmsPropState:
    caches: dict[str, np.ndarray]
    lr: float = 0.0002
    decay: float = 0.9
    eps: float = 1e-6

    @classmethod
    def for_params(cls, params: NetworkParams, lr=0.0002, decay=0.9, eps=1e-6) -> RmsPropState:
        return cls({k: np.zeros_like(v) for k, v in params.arrays.items()}, lr, decay, eps)


def rmsprop_step(
    params: NetworkParams, grads: dict[str, np.ndarray], state: RmsPropState, inplace: bool = False
) -> NetworkParams:
    """One RMSProp update; ``state.caches`` is always updated in place.

    ``cache <- decay * cache + (1 - decay) * g**2`` then
    ``param <- param - lr * g / sqrt(cache + eps)``.
    """
    out = params if inplace else params.copy()
    for name, p in out.arrays.items():
        g = grads[name]
        cache = state.caches[name]
        cache *= state.decay
        tmp = np.multiply(g, g)
        tmp *= 1.0 - state.decay
        cache += tmp
        np.add(cache, state.eps, out=tmp)
        np.sqrt(tmp, out=tmp)
        np.divide(g, tmp, out=tmp)
        tmp *= state.lr
        p -= tmp
    return out
