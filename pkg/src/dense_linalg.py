"""
Dense symmetric positive-definite kernel.

Single linear systems of the package go through the functions below; plain products (matvec,
matmul, transpose, outer, dot) are numpy operators on the arrays returned by `as_matrix` / `as_vector`.
The batched cut evaluation of the local solver uses numpy's stacked solver on many small systems.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from src.errors import DimensionMismatch, NotSPD

SYMMETRY_RTOL = 1e-10


def as_matrix(a) -> np.ndarray:
    """
    Coerce to a finite 2-d float array.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f'Expected a matrix, got an array with {a.ndim} dimension(s).')
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch('Matrix has non-finite entries.')
    return a


def as_vector(b) -> np.ndarray:
    """
    Coerce to a finite 1-d float array.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise DimensionMismatch(f'Expected a vector, got an array with {b.ndim} dimension(s).')
    if not np.all(np.isfinite(b)):
        raise DimensionMismatch('Vector has non-finite entries.')
    return b


@dataclass(frozen=True)
class CholeskyFactor:
    """
    Lower-triangular factor of an SPD matrix, with strictly positive diagonal.
    """
    lower: np.ndarray
    dim: int

    @property
    def upper(self) -> np.ndarray:
        return self.lower.T


def cholesky(a) -> CholeskyFactor:
    """
    Factor a symmetric positive-definite matrix as lower @ lower.T.

    Raises NotSPD instead of returning a factor for indefinite, singular or asymmetric input.
    A pivot is rejected when it is not above dim * machine-epsilon * max-diagonal.
    """
    a = as_matrix(a)
    n, m = a.shape
    if n != m:
        raise DimensionMismatch(f'Cholesky needs a square matrix, got {n}x{m}.')
    scale = np.max(np.abs(a)) if a.size else 0.
    if np.max(np.abs(a - a.T), initial=0.) > SYMMETRY_RTOL * max(scale, 1e-300):
        raise NotSPD('Matrix is not symmetric.')
    max_diag = np.max(np.diag(a), initial=0.)
    threshold = n * np.finfo(float).eps * max_diag
    if max_diag <= 0:
        raise NotSPD('Matrix has no positive diagonal entry.')
    try:
        lower = linalg.cholesky(a, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NotSPD(f'Cholesky factorization failed: {exc}') from exc
    pivots = np.diag(lower) ** 2
    if np.any(pivots <= threshold):
        raise NotSPD(f'Pivot {pivots.min():.3e} below threshold {threshold:.3e}.')
    return CholeskyFactor(lower=lower, dim=n)


def _check_rhs(f: CholeskyFactor, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.dim:
        raise DimensionMismatch(f'Right-hand side has length {b.shape[0]}, factor has dim {f.dim}.')
    return b


def solve_spd(f: CholeskyFactor, b) -> np.ndarray:
    """
    Solve (lower @ lower.T) x = b.
    """
    b = _check_rhs(f, b)
    return linalg.cho_solve((f.lower, True), b, check_finite=False)


def solve_lower_transposed(f: CholeskyFactor, b) -> np.ndarray:
    """
    Apply the inverse-transpose of the upper factor: returns x with upper.T @ x = b.

    With upper = lower.T this is a forward substitution with `lower`.
    """
    b = _check_rhs(f, b)
    return linalg.solve_triangular(f.lower, b, lower=True, check_finite=False)

