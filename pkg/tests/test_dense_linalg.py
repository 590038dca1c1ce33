import numpy as np
import pytest

from src.dense_linalg import as_vector, cholesky, solve_lower_transposed, solve_spd
from src.errors import DimensionMismatch, NotSPD


def random_spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def test_identity_factor():
    f = cholesky(np.eye(3))
    np.testing.assert_array_equal(f.lower, np.eye(3))


def test_known_factor():
    f = cholesky([[4., 2.], [2., 3.]])
    np.testing.assert_allclose(f.lower, [[2., 0.], [1., np.sqrt(2.)]])
    np.testing.assert_allclose((f.lower @ f.lower.T), [[4., 2.], [2., 3.]])
    np.testing.assert_array_equal(f.upper, f.lower.T)


@pytest.mark.parametrize('matrix', [
    [[1., 2.], [2., 1.]],
    [[1., 1.], [1., 1.]],
    [[1., 0.5], [0.4, 1.]],
    [[-1., 0.], [0., 2.]],
])
def test_not_spd(matrix):
    with pytest.raises(NotSPD):
        cholesky(matrix)


def test_non_square():
    with pytest.raises(DimensionMismatch):
        cholesky(np.ones((2, 3)))


def test_solve_spd():
    f = cholesky([[4., 2.], [2., 3.]])
    np.testing.assert_allclose(solve_spd(f, [8., 7.]), [1.25, 1.5])
    np.testing.assert_array_equal(solve_spd(cholesky(np.eye(3)), [1., 2., 3.]), [1., 2., 3.])


def test_solve_spd_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        solve_spd(cholesky(np.eye(3)), [1., 2.])


def test_solve_lower_transposed_diagonal():
    f = cholesky(np.diag([4., 16.]))
    np.testing.assert_allclose(solve_lower_transposed(f, [2., 8.]), [1., 2.])


@pytest.mark.parametrize('seed', range(5))
def test_triangular_solves_multiply_back(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    f = cholesky(random_spd(rng, 5))
    b = rng.standard_normal(5)
    np.testing.assert_allclose(f.upper.T @ solve_lower_transposed(f, b), b, atol=1e-12)
    np.testing.assert_allclose((f.lower @ f.lower.T) @ solve_spd(f, b), b, atol=1e-10)


def test_non_finite_vector():
    with pytest.raises(DimensionMismatch):
        as_vector([1., np.nan])


def test_factor_is_bit_deterministic():
    rng = np.random.Generator(np.random.PCG64(11))
    a = random_spd(rng, 8)
    first = cholesky(a)
    for _ in range(3):
        np.testing.assert_array_equal(cholesky(a.copy()).lower, first.lower)
