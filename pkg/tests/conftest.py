import numpy as np
import pytest

from spikegrad.lif import LifParams, Network


def random_net(layer_sizes, seed=0, leak=0.9, slope=25.0, gain=2.0,
               dtype=np.float64):
    lif = LifParams(leak=leak, threshold=1.0, slope=slope)
    return Network.init(layer_sizes, lif, seed=seed, dtype=dtype, gain=gain)


def random_raster(batch, num_steps, channels, seed=0, density=0.3):
    rng = np.random.default_rng(seed)
    return (rng.random((batch, num_steps, channels)) < density).astype(np.uint8)


def random_deltas(num_steps, batch, n_out, seed=0):
    rng = np.random.default_rng(seed + 1000)
    return rng.normal(size=(num_steps, batch, n_out))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
