"""Independent reference implementations used by several test modules."""

import numpy as np

from trafficdqn.observation import Observation


def naive_conv_relu(x, w, b, stride):
    """Valid cross-correlation + ReLU with explicit loops over filters and output cells."""
    c, h, wd = x.shape
    f, _, k, _ = w.shape
    ho, wo = (h - k) // stride + 1, (wd - k) // stride + 1
    out = np.zeros((f, ho, wo))
    for fi in range(f):
        for i in range(ho):
            for j in range(wo):
                window = x[:, i * stride : i * stride + k, j * stride : j * stride + k]
                out[fi, i, j] = max(float(np.sum(window * w[fi])) + b[fi], 0.0)
    return out


def naive_dense(x, w, b, relu):
    out = np.array([float(np.sum(x * w[:, j])) + b[j] for j in range(w.shape[1])])
    return np.maximum(out, 0.0) if relu else out


def naive_forward(params, obs):
    arch = params.arch
    flat = []
    for branch, x in (("p", obs.P), ("v", obs.V)):
        a = naive_conv_relu(x[None], params[f"{branch}_conv1_w"], params[f"{branch}_conv1_b"], arch.conv1[2])
        a = naive_conv_relu(a, params[f"{branch}_conv2_w"], params[f"{branch}_conv2_b"], arch.conv2[2])
        flat.append(a.reshape(-1))
    z = np.concatenate(flat + [obs.L])
    a = naive_dense(z, params["fc1_w"], params["fc1_b"], True)
    a = naive_dense(a, params["fc2_w"], params["fc2_b"], True)
    return naive_dense(a, params["out_w"], params["out_b"], False)


def random_obs(rng, shape=(16, 20)):
    P = (rng.random(shape) < 0.3).astype(float)
    V = P * rng.random(shape)
    L = np.eye(2)[rng.integers(2)]
    return Observation(P, V, L)


# --------------------------------------------------------------------------
# finite differences


def batch_loss(params, batch, actions, targets):
    from trafficdqn.network import mse_loss_and_grads

    P, V, L = (np.stack([getattr(o, f) for o in batch]) for f in "PVL")
    return mse_loss_and_grads(params, P, V, L, actions, targets)


def relu_pattern(params, batch):
    """Signs of every ReLU pre-activation for the batch, flattened."""
    from trafficdqn.network import forward_batch

    P, V, L = (np.stack([getattr(o, f) for o in batch]) for f in "PVL")
    _, (cache_p, cache_v, _, _, h3, _, h4, _) = forward_batch(params, P, V, L)
    pre = [cache_p[2], cache_p[5], cache_v[2], cache_v[5], h3, h4]
    return np.concatenate([(h > 0).ravel() for h in pre])


def fd_grad(params, name, index, batch, actions, targets, h=1e-5):
    """Central difference of the batch loss in one parameter.

    Returns ``(estimate, smooth)``; ``smooth`` is False when some ReLU changes
    sides between the two probes, where the central difference is not an
    estimate of the (one-sided) derivative.
    """
    arr = params.arrays[name]
    orig = arr[index]
    arr[index] = orig + h
    up, _ = batch_loss(params, batch, actions, targets)
    mask_up = relu_pattern(params, batch)
    arr[index] = orig - h
    down, _ = batch_loss(params, batch, actions, targets)
    mask_down = relu_pattern(params, batch)
    arr[index] = orig
    return (up - down) / (2 * h), bool(np.array_equal(mask_up, mask_down))


def rel_err(a, b, floor=1e-6):
    """Relative error; ``floor`` keeps round-off on near-zero gradients from dominating."""
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def gradient_check(params, batch, actions, targets, samples=None, rng=None):
    """Max relative error of backprop against central differences.

    Checks every parameter when ``samples`` is None, else ``samples`` randomly
    drawn (name, index) pairs, redrawing any that straddle a ReLU kink.
    Returns ``(max_error, n_checked, n_kinks)``.
    """
    _, grads = batch_loss(params, batch, actions, targets)
    if samples is None:
        candidates = ((name, idx) for name, arr in params.arrays.items() for idx in np.ndindex(arr.shape))
    else:
        names = list(params.arrays)

        def draw():
            while True:
                name = names[rng.integers(len(names))]
                yield name, tuple(int(rng.integers(n)) for n in params[name].shape)

        candidates = draw()
    worst, checked, kinks = 0.0, 0, 0
    for name, idx in candidates:
        numeric, smooth = fd_grad(params, name, idx, batch, actions, targets)
        if not smooth:
            kinks += 1
            continue
        worst = max(worst, float(rel_err(grads[name][idx], numeric)))
        checked += 1
        if samples is not None and checked == samples:
            break
    return worst, checked, kinks
