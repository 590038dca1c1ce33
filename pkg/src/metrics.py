from typing import Sequence

import numpy as np

from src.topology import Topology


def _regressors(states) -> Sequence[np.ndarray]:
    ws = [state.w for state in states]
    if any(w is None for w in ws):
        raise ValueError('Every agent needs a regressor before errors can be computed.')
    return ws


def consensus_error(states, topo: Topology) -> float:
    """
    Mean Euclidean distance between the regressors of adjacent agents, 0 when the graph has no edges.
    """
    ws = _regressors(states)
    if not topo.edges:
        return 0.
    total = sum(float(np.linalg.norm(ws[i] - ws[j])) for i, j in sorted(topo.edges))
    return total / len(topo.edges)


def local_errors(states, topo: Topology) -> np.ndarray:
    """
    For every agent, the mean squared Euclidean distance between its regressor and its neighbors'.

    An agent without neighbors has error 0.
    """
    ws = _regressors(states)
    errors = np.zeros(topo.n_agents)
    for i in range(topo.n_agents):
        neighbors = topo.neighbor_lists[i]
        if neighbors:
            errors[i] = np.mean([np.sum((ws[i] - ws[j]) ** 2) for j in neighbors])
    return errors


def oracle_gap(states, w_hat) -> float:
    """
    Mean over agents of ||w^i - w_hat||, the distance to the centralized solution.
    """
    ws = _regressors(states)
    return float(np.mean([np.linalg.norm(w - w_hat) for w in ws]))


def support_matches(states, support) -> bool:
    """
    Whether every agent's support equals the given index set.
    """
    target = set(int(i) for i in support)
    return all(set(int(i) for i in np.flatnonzero(state.s)) == target for state in states)
