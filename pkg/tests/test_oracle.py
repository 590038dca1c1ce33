import numpy as np
import pytest

from src.datagen import Dataset, generate, make_rng, partition
from src.errors import InvalidParams, TooLarge
from src.local_qip import c_of_s, raw_objective, transform
from src.oracle import enumerate_local, random_local_case, solve_centralized, tiny_network


def test_ties_go_to_lexicographically_smallest():
    lp, d = transform(Dataset(np.zeros((3, 4)), np.zeros(3)), 1.)
    solution = enumerate_local(lp, d, 2)
    np.testing.assert_array_equal(solution.s, [0, 0, 1, 1])
    assert solution.objective == 0.


def test_best_support_beats_every_other(make_problem):
    _, lp, d, _ = make_problem(0, p=6)
    solution = enumerate_local(lp, d, 2)
    assert solution.s.sum() == 2
    for i in range(6):
        for j in range(i + 1, 6):
            s = np.zeros(6)
            s[[i, j]] = 1
            assert c_of_s(lp, d, s)[0] + lp.const_term >= solution.objective - 1e-9


def test_enumeration_limit():
    data, _ = generate(40, 2, 50, seed=0)
    lp, d = transform(data, 1.)
    with pytest.raises(TooLarge):
        enumerate_local(lp, d, 20)


def test_centralized_objective_is_pooled_objective():
    data, truth = generate(6, 2, 120, sigma=0.05, seed=4, w_min=0.5)
    w, z, s = solve_centralized(data, 1., 2)
    assert z == pytest.approx(raw_objective(data, 1., np.zeros(6), w), rel=1e-10)
    assert tuple(np.flatnonzero(s)) == truth.support
    assert np.count_nonzero(w) == 2


def test_random_local_case_ranges():
    rng = make_rng(1)
    for _ in range(20):
        lp, d, k = random_local_case(rng)
        assert 4 <= lp.p <= 12
        assert 1 <= k <= lp.p
        assert lp.gamma in (0.1, 1., 10.)
        assert d.shape == (lp.p,)


def test_tiny_network():
    shards, truth = tiny_network(0)
    assert len(shards) == 3
    assert {shard.n for shard in shards} == {40}
    assert shards.p == 4
    assert truth.k == 2


def test_full_support_is_dense_ridge():
    data, _ = generate(5, 2, 30, seed=8)
    gamma = 2.
    lp, d = transform(data, gamma)
    solution = enumerate_local(lp, d, 5)
    dense = np.linalg.solve(data.x.T @ data.x + 2. / gamma * np.eye(5), data.x.T @ data.y)
    np.testing.assert_array_equal(solution.s, np.ones(5))
    np.testing.assert_allclose(solution.w, dense, rtol=1e-9, atol=1e-12)
    assert solution.objective == pytest.approx(raw_objective(data, gamma, np.zeros(5), dense), rel=1e-10)


@pytest.mark.parametrize('seed', range(5))
def test_objective_decreases_with_k(seed):
    data, _ = generate(7, 3, 60, seed=seed)
    objectives = [solve_centralized(data, 1., k)[1] for k in range(1, 8)]
    assert all(b <= a + 1e-10 * (1. + abs(a)) for a, b in zip(objectives, objectives[1:]))


def test_centralized_ignores_row_order_and_sharding():
    data, _ = generate(6, 2, 90, seed=5)
    w, z, s = solve_centralized(data, 1., 2)

    order = make_rng(6).permutation(data.n)
    shuffled = Dataset(data.x[order], data.y[order])
    pooled = partition(data, 3, seed=7).pooled()
    for other in (shuffled, pooled):
        w_other, z_other, s_other = solve_centralized(other, 1., 2)
        np.testing.assert_array_equal(s_other, s)
        np.testing.assert_allclose(w_other, w, rtol=1e-9, atol=1e-12)
        assert z_other == pytest.approx(z, rel=1e-10)


@pytest.mark.parametrize('k', [0, 7])
def test_sparsity_out_of_range(k):
    data, _ = generate(6, 2, 30, seed=2)
    with pytest.raises(InvalidParams):
        solve_centralized(data, 1., k)
