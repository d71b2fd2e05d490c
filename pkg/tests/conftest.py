import numpy as np
import pytest

from satmimo.channel import EffectiveChannel


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def synthetic_effective(rng, L=3, K=2, M=4, N=6, noise=0.5, beta_range=(0.5, 2.0)):
    """Random rank-one effective channels at O(1) scales for solver tests."""
    b = crandn(rng, L, K, M)
    a = crandn(rng, L, K, N)
    beta = rng.uniform(*beta_range, size=(L, K))
    hbar = np.sqrt(beta)[..., None, None] * np.einsum("lkm,lkn->lkmn", b, a)
    return EffectiveChannel(hbar=hbar, b=b, a=a, beta=beta, noise_power_w=noise)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def default_config():
    from satmimo import ScenarioConfig
    return ScenarioConfig()


@pytest.fixture
def default_links(default_config):
    from satmimo import sample_geometry
    return sample_geometry(default_config, np.random.default_rng(0))


@pytest.fixture
def default_effective(default_config, default_links):
    from satmimo import effective_channels
    return effective_channels(default_links, default_config)
