from math import comb

import numpy as np
import pytest

from src.datagen import Dataset, generate, make_rng
from src.errors import CutBudgetExceeded, DimensionMismatch, InvalidParams
from src.dense_linalg import cholesky
from src.local_qip import (AgentSolver, LocalProblem, c_of_s, cut_batch, feasible_supports, grad_c, objective,
                           outer_approx, raw_objective, solve_support, top_k_support, transform, warm_start,
                           GAP_RTOL)
from src.oracle import enumerate_local, random_local_case


def random_support(rng, p, size):
    s = np.zeros(p, dtype=np.int8)
    s[rng.choice(p, size=size, replace=False)] = 1
    return s


def closed_form(lp, d, s):
    """
    1/2 Ybar.T Ybar - 1/2 r.T Xbar_s (I / gamma + Xbar_s.T Xbar_s)^-1 Xbar_s.T r with r = Ybar - d.
    """
    support = np.flatnonzero(s)
    r = lp.ybar - d
    xs = lp.xbar[:, support]
    inner = np.linalg.solve(np.eye(len(support)) / lp.gamma + xs.T @ xs, xs.T @ r)
    return 0.5 * lp.ybar @ lp.ybar - 0.5 * (r @ xs) @ inner


def raw_minimum(data, gamma_bar, d_dual, s):
    """
    min over w supported on s of 1/2 ||Y - X w||^2 + 1/gamma ||w||^2 + <D, w>, by its normal equations.
    """
    support = np.flatnonzero(s)
    xs = data.x[:, support]
    b = xs.T @ data.y - d_dual[support]
    w = np.linalg.solve(xs.T @ xs + 2. / gamma_bar * np.eye(len(support)), b)
    full = np.zeros(data.p)
    full[support] = w
    return raw_objective(data, gamma_bar, d_dual, full), full


def test_zero_dual_maps_to_zero(make_problem):
    data, _, _, _ = make_problem(0)
    _, d = transform(data, 1.)
    np.testing.assert_array_equal(d, np.zeros(data.p))


def test_zero_design_is_identity_transform():
    data = Dataset(np.zeros((5, 3)), np.ones(5))
    lp, d = transform(data, 1., [1., -2., 0.5])
    np.testing.assert_allclose(lp.xbar, np.eye(3))
    np.testing.assert_allclose(lp.ybar, np.zeros(3))
    np.testing.assert_allclose(d, [1., -2., 0.5])


def test_transform_preserves_linear_terms(make_problem, rng):
    data, lp, d, d_dual = make_problem(1, p=5)
    np.testing.assert_allclose(lp.xbar.T @ lp.xbar, np.eye(5) / lp.gamma + data.x.T @ data.x, rtol=1e-12)
    np.testing.assert_allclose(lp.ybar @ lp.xbar, data.y @ data.x, rtol=1e-10)
    for _ in range(10):
        w = rng.standard_normal(5)
        assert d @ lp.xbar @ w == pytest.approx(d_dual @ w, rel=1e-10, abs=1e-10)


def test_transformed_objective_equals_raw(make_problem, rng):
    data, lp, d, d_dual = make_problem(2, p=6)
    for _ in range(5):
        w = rng.standard_normal(6)
        assert objective(lp, d, w) + lp.const_term == pytest.approx(raw_objective(data, lp.gamma, d_dual, w),
                                                                    rel=1e-10)


def test_value_at_empty_support(make_problem):
    _, lp, d, _ = make_problem(3)
    value, alpha = c_of_s(lp, d, np.zeros(lp.p))
    assert value == pytest.approx(0.5 * lp.ybar @ lp.ybar, rel=1e-12)
    np.testing.assert_allclose(alpha, lp.ybar - d)


@pytest.mark.parametrize('seed', range(20))
def test_woodbury_value_matches_closed_form(seed, make_problem):
    rng = make_rng(seed)
    gamma_bar = [0.1, 1., 10.][seed % 3]
    data, lp, d, d_dual = make_problem(seed, p=8, n=int(rng.integers(4, 30)), gamma_bar=gamma_bar)
    for _ in range(50):
        s = random_support(rng, 8, int(rng.integers(1, 9)))
        value, _ = c_of_s(lp, d, s)
        expected = closed_form(lp, d, s)
        assert value == pytest.approx(expected, rel=1e-9, abs=1e-9)
        w = solve_support(lp, d, s)
        assert value == pytest.approx(objective(lp, d, w), rel=1e-9, abs=1e-9)
        raw_value, raw_w = raw_minimum(data, gamma_bar, d_dual, s)
        assert value + lp.const_term == pytest.approx(raw_value, rel=1e-9, abs=1e-9)
        np.testing.assert_allclose(w, raw_w, rtol=1e-7, atol=1e-9)


@pytest.mark.parametrize('seed', range(10))
def test_gradient_matches_finite_differences(seed, make_problem):
    rng = make_rng(100 + seed)
    p, k = 7, 3
    _, lp, d, _ = make_problem(seed, p=p, n=15, gamma_bar=[0.1, 1., 10.][seed % 3])
    h = 1e-5
    for _ in range(10):
        s = rng.uniform(0.05, 0.95, size=p)
        s *= min(1., (k - 0.1) / s.sum())
        g = grad_c(lp, d, s)
        fd = np.empty(p)
        for i in range(p):
            e = np.zeros(p)
            e[i] = h
            fd[i] = (c_of_s(lp, d, s + e)[0] - c_of_s(lp, d, s - e)[0]) / (2 * h)
        assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(g) + 1e-8
        assert np.all(g <= 0)


def test_gradient_at_half_ones(make_problem):
    _, lp, d, _ = make_problem(4, p=5)
    s = np.full(5, 0.5)
    h = 1e-5
    fd = np.array([(c_of_s(lp, d, s + h * e)[0] - c_of_s(lp, d, s - h * e)[0]) / (2 * h) for e in np.eye(5)])
    np.testing.assert_allclose(grad_c(lp, d, s), fd, rtol=1e-4, atol=1e-8)


def test_gradient_vanishes_when_residual_is_zero(make_problem):
    _, lp, _, _ = make_problem(5)
    np.testing.assert_allclose(grad_c(lp, lp.ybar, np.full(lp.p, 0.3)), np.zeros(lp.p), atol=1e-14)


def test_gradient_outside_box(make_problem):
    _, lp, d, _ = make_problem(5)
    with pytest.raises(InvalidParams):
        grad_c(lp, d, np.full(lp.p, 1.5))


def test_dimension_mismatch(make_problem):
    _, lp, d, _ = make_problem(6)
    with pytest.raises(DimensionMismatch):
        c_of_s(lp, d[:-1], np.ones(lp.p))
    with pytest.raises(DimensionMismatch):
        solve_support(lp, d, np.ones(lp.p + 1))


def test_empty_support_regressor_is_zero(make_problem):
    _, lp, d, _ = make_problem(7)
    np.testing.assert_array_equal(solve_support(lp, d, np.zeros(lp.p)), np.zeros(lp.p))


def test_full_support_is_dense_ridge(make_problem):
    data, lp, _, _ = make_problem(8, p=5, n=30, gamma_bar=2.)
    _, d = transform(data, 2.)
    w = solve_support(lp, d, np.ones(5))
    # Stationarity of 1/2 ||Y - X w||^2 + 1/gamma ||w||^2.
    residual = data.x.T @ (data.x @ w - data.y) + 2. / 2. * w
    assert np.linalg.norm(residual) <= 1e-8


def test_scalar_ridge():
    data = Dataset(np.ones((2, 1)), np.ones(2))
    lp, d = transform(data, 2.)
    # X.T Y / (X.T X + 2 / gamma) with gamma = 2.
    np.testing.assert_allclose(solve_support(lp, d, [1]), [2. / 3.])


def test_top_k_support():
    np.testing.assert_array_equal(top_k_support([3., -5., 0.1], 1), [0, 1, 0])
    np.testing.assert_array_equal(top_k_support([2., 2.], 1), [1, 0])


def test_warm_start(make_problem):
    _, lp, d, _ = make_problem(9, p=4)
    np.testing.assert_array_equal(warm_start(lp, d, 4), np.ones(4))
    assert warm_start(lp, d, 2).sum() == 2
    with pytest.raises(InvalidParams):
        warm_start(lp, d, 0)


def check_bound_traces(solution, p, k):
    eta = np.array(solution.eta_trace)
    upper = np.array(solution.upper_trace)
    scale = 1. + abs(upper[-1])
    assert np.all(np.diff(eta) >= -1e-9 * scale)
    assert np.all(np.diff(upper) <= 0)
    assert np.all(eta <= upper + 1e-9 * scale)
    assert upper[-1] - eta[-1] <= GAP_RTOL * scale
    assert solution.cuts_used <= feasible_supports(p, k)


@pytest.mark.parametrize('seed', range(25))
def test_outer_approximation_matches_enumeration(seed):
    lp, d, k = random_local_case(make_rng(seed))
    fast = outer_approx(lp, d, k)
    slow = enumerate_local(lp, d, k)
    assert fast.support == slow.support
    assert fast.objective == pytest.approx(slow.objective, rel=1e-8, abs=1e-8)
    np.testing.assert_allclose(fast.w, slow.w, rtol=1e-8, atol=1e-10)
    check_bound_traces(fast, lp.p, k)


def test_sparse_ridge_without_dual():
    data, _ = generate(8, 3, 40, seed=21)
    lp, d = transform(data, 1.)
    fast = outer_approx(lp, d, 3)
    slow = enumerate_local(lp, d, 3)
    assert fast.support == slow.support
    assert fast.objective == pytest.approx(slow.objective, rel=1e-8)


def test_unconstrained_case(make_problem):
    _, lp, d, _ = make_problem(10, p=5)
    solution = outer_approx(lp, d, 5)
    np.testing.assert_array_equal(solution.s, np.ones(5))
    np.testing.assert_allclose(solution.w, solve_support(lp, d, np.ones(5)))
    assert solution.cuts_used <= 2


@pytest.mark.parametrize('seed', range(5))
def test_warm_start_invariance(seed, make_problem):
    rng = make_rng(seed)
    _, lp, d, _ = make_problem(seed, p=7, n=20)
    k = 3
    reference = outer_approx(lp, d, k)
    for _ in range(4):
        other = outer_approx(lp, d, k, warm=random_support(rng, 7, int(rng.integers(0, k + 1))))
        assert other.objective == pytest.approx(reference.objective, rel=1e-9, abs=1e-9)


def test_invalid_warm_start(make_problem):
    _, lp, d, _ = make_problem(11, p=5)
    with pytest.raises(InvalidParams):
        outer_approx(lp, d, 2, warm=np.ones(5))
    with pytest.raises(InvalidParams):
        outer_approx(lp, d, 2, warm=np.array([0, 0.5, 0, 0, 0]))


def test_cut_budget():
    lp, d, _ = random_local_case(make_rng(3), p_min=10, p_max=10)
    with pytest.raises(CutBudgetExceeded):
        outer_approx(lp, d, 5, warm=np.zeros(10, dtype=np.int8), max_cuts=1)


def test_agent_solver_matches_direct_call(make_problem):
    data, lp, d, d_dual = make_problem(12, p=6)
    solver = AgentSolver(data, lp.gamma, 2)
    via_solver = solver.solve(d_dual)
    direct = outer_approx(lp, d, 2)
    assert via_solver.support == direct.support
    assert via_solver.objective == pytest.approx(direct.objective, rel=1e-12)
    assert via_solver.objective == pytest.approx(raw_objective(data, lp.gamma, d_dual, via_solver.w), rel=1e-9)


def test_feasible_supports():
    assert feasible_supports(4, 2) == 1 + 4 + 6
    assert feasible_supports(18, 3) == sum(comb(18, j) for j in range(4))
    assert feasible_supports(3, 3) == 8


@pytest.mark.parametrize('seed', range(5))
def test_cut_batch_matches_single_evaluations(seed, make_problem):
    rng = make_rng(300 + seed)
    _, lp, d, _ = make_problem(seed, p=7, n=18, gamma_bar=[0.1, 1., 10.][seed % 3])
    supports = np.array([random_support(rng, 7, int(rng.integers(0, 8))) for _ in range(30)])
    values, grads = cut_batch(lp, d, supports)
    for s, value, grad in zip(supports, values, grads):
        expected, alpha = c_of_s(lp, d, s)
        assert value == pytest.approx(expected, rel=1e-10, abs=1e-10)
        np.testing.assert_allclose(grad, grad_c(lp, d, s, alpha), rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize('seed', range(10))
def test_value_never_increases_on_larger_supports(seed, make_problem):
    rng = make_rng(400 + seed)
    p = 8
    _, lp, d, _ = make_problem(seed, p=p, n=20, gamma_bar=[0.1, 1., 10.][seed % 3])
    for _ in range(20):
        small = random_support(rng, p, int(rng.integers(0, p)))
        large = small.copy()
        extra = rng.choice(np.flatnonzero(small == 0), size=int(rng.integers(1, p - small.sum() + 1)), replace=False)
        large[extra] = 1
        c_small, _ = c_of_s(lp, d, small)
        c_large, _ = c_of_s(lp, d, large)
        assert c_large <= c_small + 1e-10 * (1. + abs(c_small))


def test_identity_design_two_features():
    # Xbar = I, Ybar = (3, 1), gamma = 1, d = 0: c({0}) = 2.75 < c({1}) = 4.75.
    lp = LocalProblem(xbar=np.eye(2), ybar=np.array([3., 1.]), gamma=1., const_term=0., p=2,
                      factor=cholesky(np.eye(2)))
    d = np.zeros(2)
    assert c_of_s(lp, d, [1, 0])[0] == pytest.approx(2.75)
    assert c_of_s(lp, d, [0, 1])[0] == pytest.approx(4.75)
    for solution in (outer_approx(lp, d, 1), enumerate_local(lp, d, 1)):
        assert solution.support == (0,)
        np.testing.assert_allclose(solution.w, [1.5, 0.])


@pytest.mark.parametrize('k', [0, 6, 10])
def test_sparsity_out_of_range(k, make_problem):
    data, lp, d, _ = make_problem(13, p=5)
    with pytest.raises(InvalidParams):
        outer_approx(lp, d, k)
    with pytest.raises(InvalidParams):
        enumerate_local(lp, d, k)
    with pytest.raises(InvalidParams):
        AgentSolver(data, lp.gamma, k)


def test_invalid_cut_budget(make_problem):
    _, lp, d, _ = make_problem(14, p=5)
    with pytest.raises(InvalidParams):
        outer_approx(lp, d, 2, max_cuts=0)


@pytest.mark.parametrize('seed', range(3))
def test_large_weight_many_rows(seed, make_problem):
    # One agent of a 50-agent network with p = 18, k = 3, 540 rows and gamma_bar = 50.
    p, k = 18, 3
    _, lp, d, _ = make_problem(seed, p=p, k_true=k, n=540, gamma_bar=50., dual_scale=20.)
    fast = outer_approx(lp, d, k)
    slow = enumerate_local(lp, d, k)
    assert fast.support == slow.support
    assert fast.objective == pytest.approx(slow.objective, rel=1e-8, abs=1e-8)
    check_bound_traces(fast, p, k)
