"""
One agent's local problem

    min_{||w||_0 <= k}  1/2 ||Y - X w||^2 + 1/gamma ||w||^2 + <D, w>,

solved exactly by outer approximation over the binary support s.

With Xbar.T Xbar = I / gamma + X.T X (Xbar upper triangular), Ybar.T Xbar = Y.T X and
d = Xbar^{-T} D, the objective equals

    1/2 ||Ybar - Xbar w||^2 + 1/(2 gamma) ||w||^2 + d.T Xbar w + const,   const = 1/2 (Y.T Y - Ybar.T Ybar).

For a fixed support s its minimum over w is

    c(s) = 1/2 (Ybar - d).T (I + gamma Xbar_s Xbar_s.T)^{-1} (Ybar - d) - 1/2 d.T d + Ybar.T d,

a convex function of s on the convex hull of the feasible supports, with
dc/ds_i = -(gamma / 2) (Xbar_i . alpha(s))^2 and alpha(s) = (I + gamma Xbar_s Xbar_s.T)^{-1} (Ybar - d).
"""
from dataclasses import dataclass, field
from math import comb
from typing import Optional, Tuple

import numpy as np

from src.datagen import Dataset
from src.dense_linalg import CholeskyFactor, as_vector, cholesky, solve_lower_transposed, solve_spd
from src.errors import CutBudgetExceeded, DimensionMismatch, InvalidParams
from src.master_bnb import CutSet, solve_master
from logging_config import get_logger

log = get_logger(__name__)

GAP_RTOL = 1e-9
# Smallest batch of extra supports cut per iteration.
MIN_POOL = 16


@dataclass(frozen=True)
class LocalProblem:
    """
    Attributes
    ----------
    xbar :
        Upper-triangular p x p matrix with xbar.T @ xbar = I / gamma + X.T @ X.
    ybar :
        Vector with ybar @ xbar = Y @ X.
    gamma :
        Regularization weight of this agent's objective (the ridge term is ||w||^2 / gamma).
    const_term :
        1/2 (Y.T Y - ybar.T ybar), added back so objectives are comparable to the untransformed one.
    factor :
        Cholesky factor of I / gamma + X.T X, whose transpose is xbar.
    """
    xbar: np.ndarray
    ybar: np.ndarray
    gamma: float
    const_term: float
    p: int
    factor: CholeskyFactor = field(repr=False)


@dataclass(frozen=True)
class LocalSolution:
    s: np.ndarray
    w: np.ndarray
    objective: float
    cuts_used: int
    master_nodes: int
    eta_trace: Tuple[float, ...] = ()
    upper_trace: Tuple[float, ...] = ()

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.s))


def transform(data: Dataset, gamma_bar: float, d_dual=None) -> Tuple[LocalProblem, np.ndarray]:
    """
    Build the transformed quadratic form of one agent and map its dual vector D to d.

    Returns
    -------
    The local problem and d = Xbar^{-T} D, so that d.T Xbar w = <D, w> for every w.
    """
    if not gamma_bar > 0:
        raise InvalidParams(f'gamma must be positive, got {gamma_bar}.')
    x, y = data.x, data.y
    p = x.shape[1]
    factor = cholesky(np.eye(p) / gamma_bar + x.T @ x)
    ybar = solve_lower_transposed(factor, x.T @ y)
    lp = LocalProblem(xbar=factor.upper.copy(),
                      ybar=ybar,
                      gamma=float(gamma_bar),
                      const_term=0.5 * float(y @ y - ybar @ ybar),
                      p=p,
                      factor=factor)
    d_dual = np.zeros(p) if d_dual is None else d_dual
    return lp, dual_to_d(lp, d_dual)


def dual_to_d(lp: LocalProblem, d_dual) -> np.ndarray:
    d_dual = as_vector(d_dual)
    if d_dual.shape[0] != lp.p:
        raise DimensionMismatch(f'Dual vector has length {d_dual.shape[0]}, problem has p={lp.p}.')
    return solve_lower_transposed(lp.factor, d_dual)


def _check(lp: LocalProblem, d, s=None):
    if len(d) != lp.p:
        raise DimensionMismatch(f'd has length {len(d)}, problem has p={lp.p}.')
    if s is not None and len(s) != lp.p:
        raise DimensionMismatch(f's has length {len(s)}, problem has p={lp.p}.')


def _alpha(lp: LocalProblem, d, s) -> np.ndarray:
    """
    alpha(s) = (I + gamma Xbar diag(s) Xbar.T)^{-1} (Ybar - d), through the Woodbury identity on the
    columns of Xbar scaled by sqrt(s_i) over the non-zero entries of s.
    """
    s = np.asarray(s, dtype=float)
    residual = lp.ybar - d
    support = np.flatnonzero(s)
    if support.size == 0:
        return residual
    a = lp.xbar[:, support] * np.sqrt(s[support])
    inner = solve_spd(cholesky(np.eye(support.size) / lp.gamma + a.T @ a), a.T @ residual)
    return residual - a @ inner


def c_of_s(lp: LocalProblem, d, s) -> Tuple[float, np.ndarray]:
    """
    Fixed-support value c(s) in its Woodbury form, and alpha(s).

    s may be any point of [0, 1]^p; for binary s the value is the minimum of the transformed
    objective (without its constant) over regressors supported on s.
    """
    _check(lp, d, s)
    d = np.asarray(d, dtype=float)
    alpha = _alpha(lp, d, s)
    residual = lp.ybar - d
    value = 0.5 * residual @ alpha - 0.5 * d @ d + lp.ybar @ d
    return float(value), alpha


def grad_c(lp: LocalProblem, d, s, alpha=None) -> np.ndarray:
    """
    Gradient of c at s: component i is -(gamma / 2) * (Xbar_i . alpha(s))^2, never positive.
    """
    _check(lp, d, s)
    if np.any((np.asarray(s) < 0) | (np.asarray(s) > 1)):
        raise InvalidParams('The gradient of c is defined on [0, 1]^p only.')
    if alpha is None:
        alpha = _alpha(lp, np.asarray(d, dtype=float), s)
    projections = lp.xbar.T @ alpha
    return -0.5 * lp.gamma * projections ** 2


def solve_support(lp: LocalProblem, d, s) -> np.ndarray:
    """
    Minimizer of the transformed objective over regressors supported on s: the restricted ridge
    system (I / gamma + Xbar_s.T Xbar_s) w_s = Xbar_s.T (Ybar - d), zero elsewhere.
    """
    _check(lp, d, s)
    w = np.zeros(lp.p)
    support = np.flatnonzero(np.asarray(s))
    if support.size == 0:
        return w
    xbar_s = lp.xbar[:, support]
    system = np.eye(support.size) / lp.gamma + xbar_s.T @ xbar_s
    w[support] = solve_spd(cholesky(system), xbar_s.T @ (lp.ybar - np.asarray(d, dtype=float)))
    return w


def objective(lp: LocalProblem, d, w) -> float:
    """
    Transformed objective 1/2 ||Ybar - Xbar w||^2 + 1/(2 gamma) ||w||^2 + d.T Xbar w, without its constant.
    """
    w = np.asarray(w, dtype=float)
    xw = lp.xbar @ w
    return float(0.5 * np.sum((lp.ybar - xw) ** 2) + 0.5 * (w @ w) / lp.gamma + np.asarray(d) @ xw)


def raw_objective(data: Dataset, gamma_bar: float, d_dual, w) -> float:
    """
    Untransformed local objective 1/2 ||Y - X w||^2 + 1/gamma ||w||^2 + <D, w>.
    """
    w = np.asarray(w, dtype=float)
    return float(0.5 * np.sum((data.y - data.x @ w) ** 2) + (w @ w) / gamma_bar + np.asarray(d_dual) @ w)


def top_k_support(values, k: int) -> np.ndarray:
    """
    Indicator of the k largest-magnitude entries; ties go to the lower index.
    """
    values = np.asarray(values, dtype=float)
    order = np.argsort(-np.abs(values), kind='stable')
    s = np.zeros(len(values), dtype=np.int8)
    s[order[:k]] = 1
    return s


def warm_start(lp: LocalProblem, d, k: int) -> np.ndarray:
    """
    Support of the k largest entries of the dense ridge solution (I / gamma + Xbar.T Xbar)^{-1} Xbar.T (Ybar - d).
    """
    if not 1 <= k <= lp.p:
        raise InvalidParams(f'Need 1 <= k <= p, got k={k}, p={lp.p}.')
    dense = solve_support(lp, d, np.ones(lp.p, dtype=np.int8))
    return top_k_support(dense, k)


def _as_support(s, lp: LocalProblem, k: int) -> np.ndarray:
    s = np.asarray(s)
    if len(s) != lp.p or not np.all((s == 0) | (s == 1)):
        raise InvalidParams('Warm start must be a binary vector of length p.')
    if s.sum() > k:
        raise InvalidParams(f'Warm start has {int(s.sum())} ones, more than k={k}.')
    return s.astype(np.int8)


def feasible_supports(p: int, k: int) -> int:
    """
    Number of 0/1 vectors of length p with at most k ones.
    """
    return sum(comb(p, j) for j in range(k + 1))


def cut_batch(lp: LocalProblem, d, supports) -> Tuple[np.ndarray, np.ndarray]:
    """
    c(s) and grad c(s) for every row of a 0/1 matrix.

    Rows with the same number of ones share one stacked solve of their restricted systems
    (I / gamma + Xbar_s.T Xbar_s) v = Xbar_s.T (Ybar - d), and alpha(s) = Ybar - d - Xbar_s v.
    """
    supports = np.asarray(supports)
    d = np.asarray(d, dtype=float)
    residual = lp.ybar - d
    alphas = np.empty((len(supports), lp.p))
    counts = supports.sum(axis=1)
    for r in np.unique(counts):
        rows = np.flatnonzero(counts == r)
        if r == 0:
            alphas[rows] = residual
            continue
        idx = np.nonzero(supports[rows])[1].reshape(len(rows), int(r))
        a = np.transpose(lp.xbar[:, idx], (1, 0, 2))
        gram = np.einsum('bpi,bpj->bij', a, a) + np.eye(int(r)) / lp.gamma
        rhs = np.einsum('bpi,p->bi', a, residual)
        inner = np.linalg.solve(gram, rhs[..., None])[..., 0]
        alphas[rows] = residual - np.einsum('bpi,bi->bp', a, inner)
    values = 0.5 * alphas @ residual - 0.5 * d @ d + lp.ybar @ d
    grads = -0.5 * lp.gamma * (alphas @ lp.xbar) ** 2
    return values, grads


def _bits(s) -> Tuple[int, ...]:
    return tuple(int(v) for v in s)


def outer_approx(lp: LocalProblem, d, k: int, warm=None, max_cuts: Optional[int] = None) -> LocalSolution:
    """
    Outer approximation of the fixed-support value over supports with at most k ones.

    Each iteration adds the cuts c(s_t) + grad c(s_t) . (s - s_t) of a batch of supports and solves
    the master problem exactly. The next batch is the master minimizer followed by the master's pool
    of other uncut supports whose envelope is still below the incumbent; the pool grows with the
    number of cuts. The loop stops when the best value found and the master lower bound eta are
    within GAP_RTOL * (1 + |best|), or when the master returns a support that already has a cut.

    Parameters
    ----------
    max_cuts:
        Cut budget. By default the number of feasible supports, which the loop can never exceed
        since no support is cut twice.

    Returns
    -------
    The optimal support, the regressor recovered from it, the objective including the constant
    term, and the bound traces of the loop.
    """
    d = np.asarray(d, dtype=float)
    _check(lp, d)
    if not 1 <= k <= lp.p:
        raise InvalidParams(f'Need 1 <= k <= p, got k={k}, p={lp.p}.')
    max_cuts = feasible_supports(lp.p, k) if max_cuts is None else max_cuts
    if max_cuts < 1:
        raise InvalidParams(f'max_cuts must be positive, got {max_cuts}.')
    s = warm_start(lp, d, k) if warm is None else _as_support(warm, lp, k)

    cuts = CutSet([], lp.p)
    seen = set()
    best_value, best_bits = np.inf, None
    eta_trace, upper_trace = [], []
    nodes = 0
    batch = s[None, :]
    while True:
        values, grads = cut_batch(lp, d, batch)
        for row, value in zip(batch, values):
            key = (float(value), _bits(row))
            if best_bits is None or key < (best_value, best_bits):
                best_value, best_bits = key
            seen.add(key[1])
        cuts.add(values, grads, batch.astype(float))

        tol = GAP_RTOL * (1. + abs(best_value))
        master = solve_master(cuts, lp.p, k, cutoff=best_value - tol, pool_size=max(MIN_POOL, len(cuts)))
        nodes += master.nodes_explored
        eta_trace.append(master.eta)
        upper_trace.append(best_value)

        if best_value - master.eta <= tol:
            break
        if _bits(master.s) in seen:
            log.debug('Master returned a support that already has a cut; stopping with the incumbent.')
            break
        room = max_cuts - len(cuts)
        if room <= 0:
            raise CutBudgetExceeded(f'Gap {best_value - master.eta:.3e} still open after {len(cuts)} cuts.')
        fresh = [row for row in (master.s,) + master.pool if _bits(row) not in seen]
        batch = np.array(fresh[:room], dtype=np.int8)

    best_s = np.array(best_bits, dtype=np.int8)
    w = solve_support(lp, d, best_s)
    return LocalSolution(s=best_s,
                         w=w,
                         objective=best_value + lp.const_term,
                         cuts_used=len(cuts),
                         master_nodes=nodes,
                         eta_trace=tuple(eta_trace),
                         upper_trace=tuple(upper_trace))


class AgentSolver:
    """
    One agent's data, transformed once; solves its local problem for any dual vector D.
    """

    def __init__(self, data: Dataset, gamma_bar: float, k: int, max_cuts: Optional[int] = None):
        self.lp, _ = transform(data, gamma_bar)
        if not 1 <= k <= self.lp.p:
            raise InvalidParams(f'Need 1 <= k <= p, got k={k}, p={self.lp.p}.')
        self.k = k
        self.max_cuts = max_cuts

    def solve(self, d_dual, warm=None) -> LocalSolution:
        d = dual_to_d(self.lp, d_dual)
        return outer_approx(self.lp, d, self.k, warm=warm, max_cuts=self.max_cuts)
