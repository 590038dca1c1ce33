"""
Synchronous dual gradient ascent over a network of agents.

Round t, for every agent i:
    D^i   = L_ii psi^i + sum_{j in N(i)} L_ij psi^j
    w^i   = argmin_{||w||_0 <= k} 1/2 ||Y^i - X^i w||^2 + 1/gamma_bar ||w||^2 + <D^i, w>
    psi^i = psi^i + alpha_t (L_ii w^i + sum_{j in N(i)} L_ij w^j)

Agents only ever read their own and their neighbors' vectors.
"""
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.datagen import ShardedDataset
from src.errors import InvalidParams, ShapeMismatch
from src.local_qip import AgentSolver
from src.metrics import consensus_error, local_errors
from src.topology import Topology, apply_laplacian_row


@dataclass(frozen=True)
class AgentState:
    """
    Attributes
    ----------
    psi :
        The agent's row of multipliers.
    w, s :
        Regressor and support of the latest local solve (None before the first round).
    local_error :
        Mean squared distance to the neighbors' regressors after the latest round.
    local_objective :
        Optimal value of the latest local problem, constant term included.
    """
    psi: np.ndarray
    w: Optional[np.ndarray] = None
    s: Optional[np.ndarray] = None
    local_error: Optional[float] = None
    local_objective: Optional[float] = None


@dataclass(frozen=True)
class IterationRecord:
    t: int
    alpha: float
    consensus_error: float
    dual_value: float
    mean_local_error: float
    wall_time: float
    oracle_gap: Optional[float] = None


class StepSchedule:
    """
    Step sizes of the multiplier update.

    Attributes
    ----------
    kind :
        'harmonic' uses alpha0 / t, square summable but not summable. 'adaptive' starts at alpha0 and
        multiplies the step by kappa whenever every agent's local error grew since the previous round.
    alpha :
        Current step of the adaptive schedule.
    """

    def __init__(self, kind: str, alpha0: float, kappa: float = None):
        if kind not in ('harmonic', 'adaptive'):
            raise InvalidParams(f'Step schedule {kind} not recognized. Choices: harmonic, adaptive.')
        if not alpha0 > 0:
            raise InvalidParams(f'alpha0 must be positive, got {alpha0}.')
        if kind == 'adaptive' and (kappa is None or not 0 < kappa < 1):
            raise InvalidParams(f'kappa must be in (0, 1), got {kappa}.')
        self.kind = kind
        self.alpha0 = float(alpha0)
        self.kappa = None if kappa is None else float(kappa)
        self.alpha = float(alpha0)

    @classmethod
    def parse(cls, spec: str) -> 'StepSchedule':
        """
        Parse harmonic:a0=<float> or adaptive:a0=<float>,kappa=<float>.
        """
        kind, _, rest = spec.strip().partition(':')
        try:
            params = dict(item.split('=') for item in rest.split(',') if item)
            params = {key.strip(): float(value) for key, value in params.items()}
            if kind == 'harmonic':
                return cls('harmonic', params['a0'])
            if kind == 'adaptive':
                return cls('adaptive', params['a0'], params['kappa'])
        except (KeyError, ValueError) as exc:
            raise InvalidParams(f'Malformed schedule {spec!r}.') from exc
        raise InvalidParams(f'Step schedule {kind!r} not recognized. Choices: harmonic, adaptive.')

    def __str__(self):
        if self.kind == 'harmonic':
            return f'harmonic:a0={self.alpha0:g}'
        return f'adaptive:a0={self.alpha0:g},kappa={self.kappa:g}'

    def copy(self) -> 'StepSchedule':
        return StepSchedule(self.kind, self.alpha0, self.kappa)


def step_size(schedule: StepSchedule, t: int, eps_now=None, eps_prev=None) -> float:
    """
    Step used for the multiplier update of round t.
    """
    if schedule.kind == 'harmonic':
        return schedule.alpha0 / t
    if eps_now is not None and eps_prev is not None and np.all(np.asarray(eps_now) >= np.asarray(eps_prev)):
        schedule.alpha *= schedule.kappa
    return schedule.alpha


class NeighborView(Mapping):
    """
    Read-only view of per-agent vectors, logging (reader, owner) for every read when a log is given.
    """

    def __init__(self, vectors: Sequence[np.ndarray], reader: int, access_log: Optional[list] = None):
        self._vectors = vectors
        self._reader = reader
        self._log = access_log

    def __getitem__(self, j):
        if self._log is not None:
            self._log.append((self._reader, j))
        return self._vectors[j]

    def __iter__(self):
        return iter(range(len(self._vectors)))

    def __len__(self):
        return len(self._vectors)


def make_solvers(shards: ShardedDataset, gamma: float, k: int, max_cuts: Optional[int] = None) -> List[AgentSolver]:
    """
    One solver per shard with gamma_bar = gamma * N, so the local ridge terms add up to 1/gamma.
    """
    gamma_bar = gamma * len(shards)
    return [AgentSolver(shard, gamma_bar, k, max_cuts=max_cuts) for shard in shards]


def init(shards: ShardedDataset, topo: Topology, p: int = None) -> List[AgentState]:
    """
    Zero multipliers for every agent; regressors are unset until the first round.
    """
    if len(shards) != topo.n_agents:
        raise ShapeMismatch(f'{len(shards)} shards for {topo.n_agents} agents.')
    p = shards.p if p is None else p
    if p != shards.p:
        raise ShapeMismatch(f'Shards have {shards.p} features, configuration says {p}.')
    return [AgentState(psi=np.zeros(p)) for _ in range(topo.n_agents)]


def run_round(states: Sequence[AgentState],
              topo: Topology,
              solvers: Sequence[AgentSolver],
              schedule: StepSchedule,
              t: int,
              executor: ThreadPoolExecutor = None,
              access_log: Optional[list] = None) -> Tuple[List[AgentState], IterationRecord]:
    """
    One synchronous round: dual vectors, local solves, errors, step size, multiplier update.

    Local solves are independent and may run on `executor`; results are assembled in agent order.
    """
    if t < 1:
        raise InvalidParams(f'Rounds are numbered from 1, got {t}.')
    if len(states) != topo.n_agents or len(solvers) != topo.n_agents:
        raise ShapeMismatch('Need exactly one state and one solver per agent.')
    start = time.perf_counter()
    n = topo.n_agents

    psis = [state.psi for state in states]
    duals = [apply_laplacian_row(topo, i, NeighborView(psis, i, access_log)) for i in range(n)]

    def solve(i):
        return solvers[i].solve(duals[i], warm=states[i].s)

    if executor is None:
        solutions = [solve(i) for i in range(n)]
    else:
        solutions = list(executor.map(solve, range(n)))

    solved = [replace(state, w=sol.w, s=sol.s, local_objective=sol.objective)
              for state, sol in zip(states, solutions)]
    eps_now = local_errors(solved, topo)
    eps_prev = None
    if all(state.local_error is not None for state in states):
        eps_prev = np.array([state.local_error for state in states])
    alpha = step_size(schedule, t, eps_now, eps_prev)

    ws = [state.w for state in solved]
    new_states = []
    for i, state in enumerate(solved):
        direction = apply_laplacian_row(topo, i, NeighborView(ws, i, access_log))
        new_states.append(replace(state, psi=state.psi + alpha * direction, local_error=float(eps_now[i])))

    record = IterationRecord(t=t,
                             alpha=float(alpha),
                             consensus_error=consensus_error(new_states, topo),
                             dual_value=float(sum(sol.objective for sol in solutions)),
                             mean_local_error=float(np.mean(eps_now)),
                             wall_time=time.perf_counter() - start)
    return new_states, record
