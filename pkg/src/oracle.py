"""
Brute-force reference solvers, used to certify the outer approximation and the simulator.

They only use `solve_support` and enumeration, never the cutting-plane path.
"""
import itertools
from math import comb
from typing import Tuple

import numpy as np

from src.datagen import Dataset, GroundTruth, ShardedDataset, generate, partition
from src.errors import InvalidParams, TooLarge
from src.local_qip import LocalProblem, LocalSolution, objective, solve_support, transform

MAX_SUPPORTS = 10 ** 6


def _supports(p: int, k: int):
    """
    All supports with exactly k ones, from the lexicographically smallest 0/1 vector up.
    """
    for ones in itertools.combinations(range(p - 1, -1, -1), k):
        s = np.zeros(p, dtype=np.int8)
        s[list(ones)] = 1
        yield s


def enumerate_local(lp: LocalProblem, d, k: int) -> LocalSolution:
    """
    Best size-k support by exhaustive search; ties go to the lexicographically smallest 0/1 vector.
    """
    if not 1 <= k <= lp.p:
        raise InvalidParams(f'Need 1 <= k <= p, got k={k}, p={lp.p}.')
    n_supports = comb(lp.p, k)
    if n_supports > MAX_SUPPORTS:
        raise TooLarge(f'C({lp.p}, {k}) = {n_supports} supports exceeds the enumeration limit {MAX_SUPPORTS}.')
    d = np.asarray(d, dtype=float)
    best_key, best_s, best_w = None, None, None
    for s in _supports(lp.p, k):
        w = solve_support(lp, d, s)
        key = (objective(lp, d, w), tuple(int(v) for v in s))
        if best_key is None or key < best_key:
            best_key, best_s, best_w = key, s, w
    return LocalSolution(s=best_s,
                         w=best_w,
                         objective=best_key[0] + lp.const_term,
                         cuts_used=0,
                         master_nodes=0)


def solve_centralized(data: Dataset, gamma: float, k: int) -> Tuple[np.ndarray, float, np.ndarray]:
    """
    Exact minimizer of the pooled problem 1/2 ||Y - X w||^2 + 1/gamma ||w||^2 with ||w||_0 <= k.

    With gamma_bar = gamma * N on each of N agents the local ridge terms add up to 1/gamma, so z
    is directly comparable to the sum of the agents' local objectives.

    Returns
    -------
    w, z (all constant terms included) and the support s.
    """
    lp, d = transform(data, gamma)
    solution = enumerate_local(lp, d, k)
    return solution.w, solution.objective, solution.s


GAMMA_GRID = (0.1, 1., 10.)


def random_local_case(rng: np.random.Generator, p_min: int = 4, p_max: int = 12):
    """
    Draw one local problem for checking: p in [p_min, p_max], k in [1, p], gamma in GAMMA_GRID,
    a generated dataset of p to 4p rows and a standard normal dual vector D.

    Returns
    -------
    lp, d and k.
    """
    p = int(rng.integers(p_min, p_max + 1))
    k = int(rng.integers(1, p + 1))
    gamma_bar = float(rng.choice(GAMMA_GRID))
    n = int(rng.integers(p, 4 * p + 1))
    data, _ = generate(p, max(1, p // 3), n, seed=int(rng.integers(2 ** 31)))
    lp, d = transform(data, gamma_bar, rng.standard_normal(p))
    return lp, d, k


def tiny_network(seed: int, n_agents: int = 3, p: int = 4, k: int = 2, n_per_agent: int = 40,
                 sigma: float = 0.01) -> Tuple[ShardedDataset, GroundTruth]:
    """
    Small instance with a well separated true support (non-zeros of magnitude at least 0.5),
    split evenly over `n_agents` agents.
    """
    data, truth = generate(p, k, n_agents * n_per_agent, sigma=sigma, seed=seed, w_min=0.5)
    return partition(data, n_agents, seed), truth
