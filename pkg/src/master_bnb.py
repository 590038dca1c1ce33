"""
Exact solver for the outer-approximation master problem

    min eta  s.t.  eta >= value_j + grad_j . (s - anchor_j)  for every cut j,
                   s in {0, 1}^p,  sum(s) <= k,

by branch-and-bound over the coordinates of s, processed one coordinate at a time for a whole
batch of open nodes. Ties are broken towards the lexicographically smallest s (compared as a
0/1 tuple).
"""
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import DimensionMismatch, NoCuts

# Slack on the pruning test, so rounding in a node bound never hides a tied optimum.
PRUNE_RTOL = 1e-9
# Leaves are evaluated in blocks of this many rows.
LEAF_BLOCK = 2048


@dataclass(frozen=True)
class Cut:
    """
    Affine under-estimator c(anchor) + grad . (s - anchor) of the convex fixed-support value c.
    """
    value: float
    grad: np.ndarray
    anchor: np.ndarray


@dataclass(frozen=True)
class MasterResult:
    """
    Attributes
    ----------
    s :
        Minimizer of the cut envelope, lexicographically smallest among ties.
    eta :
        Envelope value at s.
    nodes_explored :
        Open nodes kept after bounding, plus leaves evaluated.
    pool :
        Other supports whose envelope value is below the requested cutoff, best first.
    """
    s: np.ndarray
    eta: float
    nodes_explored: int
    pool: Tuple[np.ndarray, ...] = ()


class CutSet:
    """
    Cuts stacked into arrays: eta(s) = max(offsets + grads @ s).

    Cuts can be appended, so an outer-approximation loop keeps one CutSet for its whole run.
    """

    def __init__(self, cuts: Sequence[Cut], p: int):
        self.p = p
        self.grads = np.empty((0, p))
        self.offsets = np.empty(0)
        self.anchors = np.empty((0, p))
        if cuts:
            self.add(np.array([float(c.value) for c in cuts]),
                     [np.asarray(c.grad, dtype=float) for c in cuts],
                     [np.asarray(c.anchor, dtype=float) for c in cuts])

    def __len__(self):
        return len(self.offsets)

    def add(self, values, grads, anchors):
        """
        Append cuts given as arrays of values (m,), gradients (m, p) and anchors (m, p).
        """
        for g, a in zip(grads, anchors):
            if len(g) != self.p or len(a) != self.p:
                raise DimensionMismatch(f'Cut of dimension {len(g)} in a master problem of dimension {self.p}.')
        grads = np.asarray(grads, dtype=float).reshape(-1, self.p)
        anchors = np.asarray(anchors, dtype=float).reshape(-1, self.p)
        offsets = np.asarray(values, dtype=float) - np.einsum('ij,ij->i', grads, anchors)
        self.grads = np.vstack([self.grads, grads])
        self.anchors = np.vstack([self.anchors, anchors])
        self.offsets = np.concatenate([self.offsets, offsets])
        self._grads_t = np.ascontiguousarray(self.grads.T)

    def values(self, supports: np.ndarray) -> np.ndarray:
        """
        Envelope value at every row of a 0/1 matrix.

        Each value is offsets plus the chosen gradient columns added in index order, so a support
        gets bit-for-bit the same value whichever batch it is evaluated in.
        """
        supports = np.asarray(supports)
        out = np.empty(len(supports))
        counts = supports.sum(axis=1)
        for r in np.unique(counts):
            rows = np.flatnonzero(counts == r)
            for start in range(0, len(rows), LEAF_BLOCK):
                block = rows[start:start + LEAF_BLOCK]
                idx = np.nonzero(supports[block])[1].reshape(len(block), int(r))
                acc = np.repeat(self.offsets[None, :], len(block), axis=0)
                for c in range(int(r)):
                    acc = acc + self._grads_t[idx[:, c]]
                out[block] = acc.max(axis=1)
        return out


def _initial_candidates(cut_set: CutSet, k: int) -> np.ndarray:
    """
    Zero vector, binary anchors with at most k ones and the greedy minimizer of every single cut.
    """
    p = cut_set.p
    anchors = cut_set.anchors
    binary = np.all((anchors == 0) | (anchors == 1), axis=1) & (anchors.sum(axis=1) <= k)
    greedy = np.zeros((len(cut_set), p), dtype=np.int8)
    if k > 0:
        order = np.argsort(cut_set.grads, axis=1, kind='stable')[:, :k]
        rows = np.repeat(np.arange(len(cut_set)), k)
        cols = order.ravel()
        take = cut_set.grads[rows, cols] < 0
        greedy[rows[take], cols[take]] = 1
    return np.unique(np.vstack([np.zeros((1, p), dtype=np.int8), anchors[binary].astype(np.int8), greedy]),
                     axis=0)


def _completions(cut_set: CutSet, branch_order: np.ndarray, k: int) -> np.ndarray:
    """
    completions[depth, r, j]: sum of the r most negative slopes of cut j over the coordinates
    not yet branched on at `depth`.
    """
    p = cut_set.p
    negative = np.minimum(cut_set.grads, 0.)
    table = np.zeros((p + 1, k + 1, len(cut_set)))
    for depth in range(p):
        free = np.sort(negative[:, branch_order[depth:]], axis=1)
        partial = np.cumsum(free, axis=1)
        for r in range(1, k + 1):
            table[depth, r] = partial[:, min(r, p - depth) - 1]
    return table


def _lexmin(values: np.ndarray, supports: np.ndarray) -> Tuple[float, Tuple[int, ...]]:
    best = values.min()
    tied = supports[values == best]
    return float(best), min(tuple(int(v) for v in row) for row in tied)


def solve_master(cuts: Union[Sequence[Cut], CutSet], p: int, k: int, cutoff: Optional[float] = None,
                 pool_size: int = 0) -> MasterResult:
    """
    Minimize the maximum of the cuts over binary s with at most k ones.

    Parameters
    ----------
    cuts:
        Non-empty list of cuts of dimension p, or a CutSet.
    p:
        Dimension of s.
    k:
        Cardinality budget.
    cutoff:
        With pool_size > 0, also collect up to pool_size other supports whose envelope value is
        below cutoff.
    pool_size:
        Maximum size of the pool.

    Returns
    -------
    The minimizer (lexicographically smallest among ties), its envelope value, the number of
    branch-and-bound nodes explored and the pool.
    """
    cut_set = cuts if isinstance(cuts, CutSet) else CutSet(cuts, p)
    if not len(cut_set):
        raise NoCuts('The master problem needs at least one cut.')
    if cut_set.p != p:
        raise DimensionMismatch(f'Cuts of dimension {cut_set.p} in a master problem of dimension {p}.')
    k = max(0, min(k, p))
    collect = pool_size > 0 and cutoff is not None
    pool: Dict[Tuple[int, ...], float] = {}

    def visit(leaves: np.ndarray):
        nonlocal best_key
        values = cut_set.values(leaves)
        key = _lexmin(values, leaves)
        if key < best_key:
            best_key = key
        if collect:
            for i in np.flatnonzero(values < cutoff):
                pool[tuple(int(v) for v in leaves[i])] = float(values[i])

    candidates = _initial_candidates(cut_set, k)
    best_key = (np.inf, ())
    visit(candidates)
    nodes = len(candidates)

    # Branch first on the coordinates whose slope differs most across cuts.
    spread = cut_set.grads.max(axis=0) - cut_set.grads.min(axis=0)
    branch_order = np.argsort(-spread, kind='stable')
    completions = _completions(cut_set, branch_order, k)

    chosen = np.zeros((1, p), dtype=np.int8)
    count = np.zeros(1, dtype=int)
    base = cut_set.offsets[None, :].copy()
    for depth in range(p if k > 0 else 0):
        threshold = best_key[0] + PRUNE_RTOL * (1. + abs(best_key[0]))
        if collect:
            limit = cutoff
            # The pool may hold the minimizer itself, which is dropped at the end.
            if len(pool) > pool_size:
                limit = min(limit, np.partition(np.fromiter(pool.values(), float), pool_size)[pool_size])
            threshold = max(threshold, limit)
        bound = (base + completions[depth][k - count]).max(axis=1)
        keep = bound <= threshold
        chosen, count, base = chosen[keep], count[keep], base[keep]
        nodes += len(count)
        if not len(count):
            break
        coord = branch_order[depth]
        taken = chosen.copy()
        taken[:, coord] = 1
        taken_count = count + 1
        taken_base = base + cut_set.grads[:, coord]
        full = taken_count == k
        if full.any():
            visit(taken[full])
            nodes += int(full.sum())
        chosen = np.vstack([chosen, taken[~full]])
        count = np.concatenate([count, taken_count[~full]])
        base = np.vstack([base, taken_base[~full]])
    else:
        if k > 0 and len(count):
            # Every coordinate is decided: the open nodes are leaves.
            visit(chosen)
            nodes += len(count)

    best_value, best_bits = best_key
    best_s = np.array(best_bits, dtype=np.int8)
    ranked = sorted((value, bits) for bits, value in pool.items() if bits != best_bits)
    return MasterResult(s=best_s,
                        eta=best_value,
                        nodes_explored=nodes,
                        pool=tuple(np.array(bits, dtype=np.int8) for _, bits in ranked[:pool_size]))
