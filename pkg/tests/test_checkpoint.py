import numpy as np
import pytest

from trafficdqn import checkpoint
from trafficdqn.agent import Hyperparams
from trafficdqn.network import Architecture, forward, init_params

from oracles import random_obs

SMALL = Architecture(input_shape=(4, 5), conv1=(2, 2, 1), conv2=(2, 2, 1), hidden=(8, 6))


def test_round_trip_is_bit_exact(tmp_path):
    params = init_params(np.random.default_rng(0))
    hyper = Hyperparams().to_dict()
    first = checkpoint.save(tmp_path / "a.ckpt", params, seed=7, hyperparams=hyper)
    loaded, meta = checkpoint.load(first)
    assert meta == {"seed": 7, "hyperparams": hyper, "version": checkpoint.VERSION}
    assert loaded.arch == params.arch
    assert list(loaded.arrays) == list(params.arrays)
    for name in params.arrays:
        assert loaded[name].dtype == np.float64
        assert np.array_equal(loaded[name], params[name])
    second = checkpoint.save(tmp_path / "b.ckpt", loaded, meta["seed"], meta["hyperparams"])
    assert first.read_bytes() == second.read_bytes()
    obs = random_obs(np.random.default_rng(1))
    assert np.array_equal(forward(loaded, obs), forward(params, obs))


def test_non_default_architecture_round_trips():
    params = init_params(np.random.default_rng(3), SMALL)
    loaded, _ = checkpoint.from_bytes(checkpoint.to_bytes(params))
    assert loaded.arch == SMALL
    assert checkpoint.to_bytes(loaded) == checkpoint.to_bytes(params)


def test_missing_file_names_path(tmp_path):
    path = tmp_path / "nope.ckpt"
    with pytest.raises(FileNotFoundError, match="nope.ckpt"):
        checkpoint.load(path)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda b: b"XX" + b[2:],  # bad magic
        lambda b: b[:-8],  # truncated
        lambda b: b + b"\0",  # trailing bytes
        lambda b: checkpoint.MAGIC + b"{not json\n",
        lambda b: b.replace(b'"version":1', b'"version":9'),
    ],
)
def test_corrupt_checkpoints_rejected(mutate):
    data = checkpoint.to_bytes(init_params(np.random.default_rng(0), SMALL))
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.from_bytes(mutate(data))
