"""
Communication graphs between agents and their Laplacians.
"""
from dataclasses import dataclass
from typing import FrozenSet, Mapping, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from src.errors import InvalidParams, MissingNeighborValue
from logging_config import get_logger

log = get_logger(__name__)

KINDS = ('clique', 'star', 'cycle', 'path', 'ws')
MAX_REWIRE_TRIES = 100


@dataclass(frozen=True)
class Topology:
    """
    Undirected, connected, unweighted graph over agents 0..n_agents-1.

    Attributes
    ----------
    edges :
        Unordered agent pairs, stored as (i, j) with i < j.
    neighbor_lists :
        Sorted neighbor indices of every agent.
    laplacian :
        Integer Laplacian, degree on the diagonal and -1 for every edge.
    """
    kind: str
    n_agents: int
    edges: FrozenSet[Tuple[int, int]]
    neighbor_lists: Tuple[Tuple[int, ...], ...]
    laplacian: np.ndarray

    def degree(self, i: int) -> int:
        return len(self.neighbor_lists[i])

    def neighbors(self, i: int) -> Tuple[int, ...]:
        return self.neighbor_lists[i]


def parse_spec(spec: str):
    """
    Parse a topology string: clique, star, cycle, path or ws:K=<int>,beta=<float>.

    Returns the kind and its keyword parameters.
    """
    spec = spec.strip()
    kind, _, rest = spec.partition(':')
    kind = kind.strip().lower()
    if kind not in KINDS:
        raise InvalidParams(f'Topology {spec!r} not recognized. Choices: {", ".join(KINDS)}.')
    params = {}
    if kind == 'ws':
        try:
            for item in rest.split(','):
                key, value = item.split('=')
                params[key.strip()] = value.strip()
            params = {'K': int(params['K']), 'beta': float(params['beta'])}
        except (KeyError, ValueError) as exc:
            raise InvalidParams(f'Malformed small-world spec {spec!r}, expected ws:K=<int>,beta=<float>.') from exc
    elif rest:
        raise InvalidParams(f'Topology {kind} takes no parameters, got {spec!r}.')
    return kind, params


def _graph(kind: str, n_agents: int, seed: int, K: int = None, beta: float = None) -> nx.Graph:
    if n_agents == 1:
        graph = nx.Graph()
        graph.add_node(0)
        return graph
    if kind == 'clique':
        return nx.complete_graph(n_agents)
    if kind == 'star':
        return nx.star_graph(n_agents - 1)
    if kind == 'cycle':
        return nx.cycle_graph(n_agents)
    if kind == 'path':
        return nx.path_graph(n_agents)
    if kind == 'ws':
        if K is None or beta is None:
            raise InvalidParams('A small-world graph needs K and beta.')
        if K < 2 or K % 2 or K >= n_agents:
            raise InvalidParams(f'Small-world mean degree K must be even, >= 2 and < n_agents, got {K}.')
        if not 0 <= beta <= 1:
            raise InvalidParams(f'Rewiring probability beta must be in [0, 1], got {beta}.')
        for attempt in range(MAX_REWIRE_TRIES):
            graph = nx.watts_strogatz_graph(n_agents, K, beta, seed=seed + attempt)
            if nx.is_connected(graph):
                if attempt:
                    log.debug(f'Small-world graph connected after {attempt + 1} draws.')
                return graph
        raise InvalidParams(f'No connected small-world graph after {MAX_REWIRE_TRIES} draws.')
    raise KeyError(f'Topology {kind} not recognized.')


def build(kind: str, n_agents: int, seed: int = 0, **params) -> Topology:
    """
    Build a connected graph of the named family.

    A single agent yields the trivial graph (no edges, 1x1 zero Laplacian) for every family except ws.
    Small-world graphs are drawn with the ring-lattice-then-rewire construction and redrawn with
    seed + 1, seed + 2, ... until connected.
    """
    if kind not in KINDS:
        raise InvalidParams(f'Topology {kind} not recognized.')
    if n_agents < 1:
        raise InvalidParams(f'Need at least one agent, got {n_agents}.')
    if kind == 'ws' and n_agents == 1:
        raise InvalidParams('A small-world graph needs K < n_agents.')
    graph = _graph(kind, n_agents, seed, **params)
    if nx.number_of_selfloops(graph):
        raise InvalidParams('Communication graph has self-loops.')
    if not nx.is_connected(graph):
        raise InvalidParams(f'{kind} graph on {n_agents} agents is not connected.')

    nodes = list(range(n_agents))
    laplacian = nx.laplacian_matrix(graph, nodelist=nodes).toarray().astype(np.int64)
    edges = frozenset((min(u, v), max(u, v)) for u, v in graph.edges())
    neighbor_lists = tuple(tuple(sorted(graph.neighbors(i))) for i in nodes)
    return Topology(kind=kind,
                    n_agents=n_agents,
                    edges=edges,
                    neighbor_lists=neighbor_lists,
                    laplacian=laplacian)


def from_spec(spec: str, n_agents: int, seed: int = 0) -> Topology:
    kind, params = parse_spec(spec)
    return build(kind, n_agents, seed, **params)


def apply_laplacian_row(t: Topology,
                        i: int,
                        values: Union[Mapping[int, np.ndarray], Sequence[np.ndarray]]) -> np.ndarray:
    """
    Row i of L applied to per-agent vectors: L_ii * values[i] + sum_{j in N(i)} L_ij * values[j].

    Only values[i] and values[j] for neighbors j are read.
    """
    try:
        own = values[i]
    except (KeyError, IndexError) as exc:
        raise MissingNeighborValue(f'Agent {i} has no value of its own.') from exc
    if own is None:
        raise MissingNeighborValue(f'Agent {i} has no value of its own.')
    row = t.laplacian[i]
    out = row[i] * np.asarray(own, dtype=float)
    for j in t.neighbor_lists[i]:
        try:
            neighbor_value = values[j]
        except (KeyError, IndexError) as exc:
            raise MissingNeighborValue(f'Agent {i} is missing the value of neighbor {j}.') from exc
        if neighbor_value is None:
            raise MissingNeighborValue(f'Agent {i} is missing the value of neighbor {j}.')
        out = out + row[j] * np.asarray(neighbor_value, dtype=float)
    return out
