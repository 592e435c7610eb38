import numpy as np
import pytest

from trafficdqn.network import (
    Architecture,
    NetworkParams,
    RmsPropState,
    backward,
    conv_forward,
    forward,
    forward_batch,
    glorot_bound,
    init_params,
    mse_loss_and_grads,
    rmsprop_step,
    zeros,
)
from trafficdqn.observation import Observation

from oracles import batch_loss, fd_grad, gradient_check, naive_conv_relu, naive_forward, random_obs

SMALL = Architecture(input_shape=(4, 5), conv1=(2, 2, 1), conv2=(2, 2, 1), hidden=(8, 6))


def random_params(rng, arch=Architecture(), bias_scale=0.1):
    """Glorot weights plus small nonzero biases, so bias paths are exercised."""
    params = init_params(rng, arch)
    for name, arr in params.arrays.items():
        if name.endswith("_b"):
            arr[...] = rng.normal(0.0, bias_scale, arr.shape)
    return params


def test_naive_oracle_on_small_network():
    rng = np.random.default_rng(7)
    for _ in range(20):
        params = random_params(rng, SMALL)
        obs = random_obs(rng, SMALL.input_shape)
        np.testing.assert_allclose(forward(params, obs), naive_forward(params, obs), rtol=1e-10, atol=0)


def test_naive_oracle_full_shape():
    rng = np.random.default_rng(9)
    params = random_params(rng)
    obs = random_obs(rng)
    np.testing.assert_allclose(forward(params, obs), naive_forward(params, obs), rtol=1e-10, atol=0)


def test_conv_oracle_full_shape():
    rng = np.random.default_rng(8)
    x = rng.random((1, 1, 16, 20))
    w = rng.normal(size=(16, 1, 4, 4))
    b = rng.normal(size=16)
    out, _ = conv_forward(x, w, b, 2)
    np.testing.assert_allclose(np.maximum(out[0], 0), naive_conv_relu(x[0], w, b, 2), rtol=1e-12)


# --------------------------------------------------------------------------
# shapes


def test_shape_chain():
    arch = Architecture()
    assert arch.conv_output_shapes() == ((16, 7, 9), (32, 6, 8))
    assert arch.concat_width == 32 * 6 * 8 * 2 + 2 == 3074
    shapes = arch.param_shapes()
    assert shapes["p_conv1_w"] == shapes["v_conv1_w"] == (16, 1, 4, 4)
    assert shapes["p_conv2_w"] == (32, 16, 2, 2)
    assert shapes["fc1_w"] == (3074, 128)
    assert shapes["fc2_w"] == (128, 64)
    assert shapes["out_w"] == (64, 2)


def test_shape_chain_through_forward():
    params = init_params(np.random.default_rng(0))
    obs = random_obs(np.random.default_rng(1))
    q, cache = forward_batch(params, obs.P[None], obs.V[None], obs.L[None])
    cache_p, _, branch_shape, z, h3, a3, h4, a4 = cache
    assert q.shape == (1, 2)
    assert branch_shape == (1, 32, 6, 8)
    assert z.shape == (1, 3074) and a3.shape == (1, 128) and a4.shape == (1, 64)
    # ReLU hidden activations are non-negative
    assert (a3 >= 0).all() and (a4 >= 0).all()


def test_wrong_shape_is_construction_error():
    arrays = dict(zeros().arrays)
    arrays["fc1_w"] = np.zeros((3073, 128))
    with pytest.raises(ValueError):
        NetworkParams(Architecture(), arrays)
    with pytest.raises(ValueError):
        Architecture(input_shape=(2, 2)).param_shapes()


# --------------------------------------------------------------------------
# forward examples


def test_zero_network_outputs_zero():
    obs = random_obs(np.random.default_rng(2))
    assert list(forward(zeros(), obs)) == [0.0, 0.0]


def test_zero_input_gives_output_bias():
    params = init_params(np.random.default_rng(3))
    params.arrays["out_b"][:] = [1.25, -0.5]
    obs = Observation(np.zeros((16, 20)), np.zeros((16, 20)), np.zeros(2))
    assert list(forward(params, obs)) == [1.25, -0.5]


def test_forward_is_pure():
    rng = np.random.default_rng(4)
    params = random_params(rng)
    obs = random_obs(rng)
    before = params.copy()
    q1 = forward(params, obs)
    q2 = forward(params, obs)
    assert np.array_equal(q1, q2)
    assert all(np.array_equal(before[k], params[k]) for k in params.arrays)


# --------------------------------------------------------------------------
# gradients


def test_gradients_match_finite_differences_small_network():
    rng = np.random.default_rng(11)
    params = random_params(rng, SMALL, bias_scale=0.3)
    batch = [random_obs(rng, SMALL.input_shape) for _ in range(3)]
    worst, checked, kinks = gradient_check(params, batch, [0, 1, 1], rng.normal(size=3))
    assert checked + kinks == params.size() and checked > 0.9 * params.size()
    assert worst < 1e-4


def test_gradients_match_finite_differences_full_network_sampled():
    rng = np.random.default_rng(12)
    params = random_params(rng)
    batch = [random_obs(rng) for _ in range(2)]
    worst, checked, _ = gradient_check(params, batch, [0, 1], rng.normal(size=2), samples=200, rng=rng)
    assert checked == 200 and worst < 1e-4


def test_kinks_are_detected():
    # a conv bias sitting exactly at a ReLU kink for an all-zero input
    params = random_params(np.random.default_rng(17), SMALL)
    params.arrays["p_conv1_b"][0] = 0.0
    zero = Observation(np.zeros((4, 5)), np.zeros((4, 5)), np.array([1.0, 0.0]))
    _, smooth = fd_grad(params, "p_conv1_b", (0,), [zero], [0], [1.0])
    assert not smooth


def test_zero_residual_gives_zero_gradients():
    rng = np.random.default_rng(13)
    params = random_params(rng)
    obs = random_obs(rng)
    q = forward(params, obs)
    grads = backward(params, obs, 1, q[1])
    assert all(not g.any() for g in grads.values())


def test_untaken_action_head_gets_no_gradient():
    rng = np.random.default_rng(14)
    params = random_params(rng)
    obs = random_obs(rng)
    grads = backward(params, obs, 0, 100.0)
    assert not grads["out_w"][:, 1].any() and grads["out_b"][1] == 0.0
    assert grads["out_b"][0] != 0.0


def test_batch_gradient_is_mean_of_per_sample_gradients():
    rng = np.random.default_rng(15)
    params = random_params(rng)
    batch = [random_obs(rng) for _ in range(4)]
    actions = [0, 1, 0, 1]
    targets = [1.0, -2.0, 0.5, 3.0]
    _, g = batch_loss(params, batch, actions, targets)
    singles = [backward(params, o, a, t) for o, a, t in zip(batch, actions, targets)]
    for name in g:
        np.testing.assert_allclose(g[name], np.mean([s[name] for s in singles], axis=0), rtol=1e-10, atol=1e-14)


# --------------------------------------------------------------------------
# optimizer


def scalar_setup(g, lr=0.0002):
    arch = SMALL
    params = zeros(arch)
    grads = {k: np.full_like(v, g) for k, v in params.arrays.items()}
    return params, grads, RmsPropState.for_params(params, lr=lr, decay=0.9, eps=1e-6)


def test_rmsprop_zero_gradient_leaves_params():
    params, grads, state = scalar_setup(0.0)
    params.arrays["fc1_w"][:] = 3.0
    out = rmsprop_step(params, grads, state)
    assert all(np.array_equal(out[k], params[k]) for k in params.arrays)


def test_rmsprop_scalar_example():
    params, grads, state = scalar_setup(1.0)
    out = rmsprop_step(params, grads, state)
    assert state.caches["out_b"][0] == pytest.approx(0.1, rel=1e-15)
    assert out["out_b"][0] == pytest.approx(-0.0002 / np.sqrt(0.1 + 1e-6), rel=1e-12)
    # not in place by default
    assert params["out_b"][0] == 0.0


def test_rmsprop_fixed_point():
    params, grads, state = scalar_setup(1.0)
    steps = []
    for n in range(1, 201):
        before = params["out_b"][0]
        params = rmsprop_step(params, grads, state, inplace=True)
        steps.append(before - params["out_b"][0])
        # cache follows 1 - 0.9**n exactly (geometric approach to g**2 = 1)
        assert state.caches["out_b"][0] == pytest.approx(1 - 0.9**n, rel=1e-9)
    assert steps[-1] == pytest.approx(0.0002 / np.sqrt(1 + 1e-6), rel=1e-9)
    assert all(a > b for a, b in zip(steps, steps[1:]))


def test_rmsprop_caches_nonnegative():
    rng = np.random.default_rng(16)
    params = random_params(rng, SMALL)
    state = RmsPropState.for_params(params)
    for _ in range(5):
        grads = {k: rng.normal(size=v.shape) for k, v in params.arrays.items()}
        params = rmsprop_step(params, grads, state)
    assert all((c >= 0).all() for c in state.caches.values())


# --------------------------------------------------------------------------
# initialization


def test_init_within_bounds_and_biases_zero():
    params = init_params(np.random.default_rng(0))
    for name, arr in params.arrays.items():
        if name.endswith("_b"):
            assert not arr.any()
        else:
            assert np.abs(arr).max() <= glorot_bound(arr.shape)


def test_glorot_bound_values():
    assert glorot_bound((16, 1, 4, 4)) == pytest.approx(np.sqrt(6 / (16 + 256)))
    assert glorot_bound((3074, 128)) == pytest.approx(np.sqrt(6 / 3202))


def test_init_deterministic():
    a = init_params(np.random.default_rng(42))
    b = init_params(np.random.default_rng(42))
    c = init_params(np.random.default_rng(43))
    assert all(np.array_equal(a[k], b[k]) for k in a.arrays)
    assert not np.array_equal(a["fc1_w"], c["fc1_w"])


def test_init_branches_independent():
    params = init_params(np.random.default_rng(0))
    assert not np.array_equal(params["p_conv1_w"], params["v_conv1_w"])


def test_init_conv1_mean_near_zero():
    w = init_params(np.random.default_rng(5))["p_conv1_w"]
    sigma = glorot_bound(w.shape) / np.sqrt(3)
    assert abs(w.mean()) < 4 * sigma / np.sqrt(w.size)
