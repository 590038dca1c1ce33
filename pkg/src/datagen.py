"""
Synthetic sparse regression data and its split across agents.

Rows of X are drawn from N(0, Sigma) with Sigma_ij = rho^|i-j|, the true regressor has k
non-zero entries drawn uniformly on [-1, 1] (or with magnitude at least w_min), and
Y = X w* + W with W ~ N(0, sigma^2).
"""
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from src.dense_linalg import as_matrix, as_vector, cholesky
from src.errors import InvalidParams, ShapeMismatch, TooFewRows

RNG_NAME = 'numpy.random.PCG64'


def make_rng(seed) -> np.random.Generator:
    """
    The only random generator of the package, so that traces reproduce across platforms.
    """
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = as_matrix(self.x)
        y = as_vector(self.y)
        if x.shape[0] < 1:
            raise ShapeMismatch('A dataset needs at least one row.')
        if x.shape[0] != y.shape[0]:
            raise ShapeMismatch(f'X has {x.shape[0]} rows but y has {y.shape[0]} entries.')
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'y', y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class ShardedDataset:
    shards: Tuple[Dataset, ...]

    def __post_init__(self):
        shards = tuple(self.shards)
        if not shards:
            raise ShapeMismatch('A sharded dataset needs at least one shard.')
        if len({shard.p for shard in shards}) != 1:
            raise ShapeMismatch('All shards must have the same number of features.')
        object.__setattr__(self, 'shards', shards)

    def __len__(self):
        return len(self.shards)

    def __iter__(self):
        return iter(self.shards)

    def __getitem__(self, i):
        return self.shards[i]

    @property
    def p(self) -> int:
        return self.shards[0].p

    def pooled(self) -> Dataset:
        """
        All shards stacked back into a single dataset.
        """
        return Dataset(np.vstack([s.x for s in self.shards]),
                       np.concatenate([s.y for s in self.shards]))


@dataclass(frozen=True)
class GroundTruth:
    """
    Attributes
    ----------
    w_star :
        True regressor, zero off `support`.
    support :
        Sorted indices of the k non-zero entries of w_star.
    sigma :
        Standard deviation of the observation noise.
    rho :
        Correlation decay of the feature covariance.
    seed :
        Seed the dataset was generated with.
    """
    w_star: np.ndarray
    support: Tuple[int, ...]
    sigma: float
    rho: float
    seed: int
    rng_name: str = field(default=RNG_NAME)

    @property
    def k(self) -> int:
        return len(self.support)

    @property
    def p(self) -> int:
        return len(self.w_star)


def covariance(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def generate(p: int,
             k: int,
             n: int,
             sigma: float = 0.1,
             rho: float = 0.1,
             seed: int = 0,
             w_min: float = 0.) -> Tuple[Dataset, GroundTruth]:
    """
    Draw a dataset Y = X w* + W.

    Parameters
    ----------
    p:
        Number of features.
    k:
        Size of the true support, 1 <= k <= p.
    n:
        Number of rows.
    sigma:
        Noise standard deviation (>= 0). With sigma = 0, Y is exactly X w*.
    rho:
        Correlation decay in [0, 1); rho = 0 gives independent features.
    seed:
        Seed of the PCG64 generator. Same seed, same bits.
    w_min:
        Smallest magnitude of a non-zero entry of w*. The default 0 draws them uniformly on [-1, 1];
        a positive value draws a random sign times a magnitude uniform on [w_min, 1].

    Returns
    -------
    The dataset and the ground truth it was drawn from.
    """
    if p < 1 or k < 1 or k > p:
        raise InvalidParams(f'Need 1 <= k <= p, got k={k}, p={p}.')
    if n < 1:
        raise InvalidParams(f'Need at least one row, got n={n}.')
    if not 0 <= rho < 1:
        raise InvalidParams(f'rho must be in [0, 1), got {rho}.')
    if sigma < 0:
        raise InvalidParams(f'sigma must be non-negative, got {sigma}.')
    if not 0 <= w_min <= 1:
        raise InvalidParams(f'w_min must be in [0, 1], got {w_min}.')

    rng = make_rng(seed)
    support = np.sort(rng.choice(p, size=k, replace=False))
    w_star = np.zeros(p)
    if w_min > 0:
        w_star[support] = rng.choice([-1., 1.], size=k) * rng.uniform(w_min, 1., size=k)
    else:
        w_star[support] = rng.uniform(-1., 1., size=k)

    factor = cholesky(covariance(p, rho))
    z = rng.standard_normal((n, p))
    x = z @ factor.lower.T
    noise = sigma * rng.standard_normal(n)
    y = x @ w_star + noise

    truth = GroundTruth(w_star=w_star,
                        support=tuple(int(i) for i in support),
                        sigma=float(sigma),
                        rho=float(rho),
                        seed=int(seed))
    return Dataset(x, y), truth


def partition(data: Dataset, n_agents: int, seed: int = 0) -> ShardedDataset:
    """
    Shuffle the rows, then cut them into `n_agents` contiguous blocks whose sizes differ by at most one.

    Rows keep their original relative order inside a shard, so a single agent receives the input unchanged.
    """
    if n_agents < 1:
        raise InvalidParams(f'Need at least one agent, got {n_agents}.')
    if data.n < n_agents:
        raise TooFewRows(f'{data.n} rows cannot be split over {n_agents} agents.')
    order = make_rng(seed).permutation(data.n)
    shards: List[Dataset] = []
    for block in np.array_split(order, n_agents):
        rows = np.sort(block)
        shards.append(Dataset(data.x[rows], data.y[rows]))
    return ShardedDataset(tuple(shards))
