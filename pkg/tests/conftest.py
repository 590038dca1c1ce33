import pytest

from src.consensus import StepSchedule
from src.datagen import ShardedDataset, generate, make_rng
from src.local_qip import transform
from src.oracle import tiny_network


@pytest.fixture
def rng():
    return make_rng(20240607)


@pytest.fixture
def make_problem():
    """
    Factory of transformed local problems: (data, lp, d, D) from a generated dataset and a normal D.
    """

    def factory(seed, p=6, k_true=2, n=24, gamma_bar=1., dual_scale=1.):
        data, _ = generate(p, k_true, n, seed=seed)
        d_dual = dual_scale * make_rng(seed + 7919).standard_normal(p)
        lp, d = transform(data, gamma_bar, d_dual)
        return data, lp, d, d_dual

    return factory


@pytest.fixture
def tiny():
    """
    3-agent path instance, p = 4, k = 2, 40 rows per agent.
    """
    return tiny_network(seed=3)


@pytest.fixture
def identical_shards():
    data, _ = generate(5, 2, 30, seed=11)
    return ShardedDataset((data, data, data))


@pytest.fixture
def harmonic():
    return StepSchedule('harmonic', 20.)
