import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monpg import (ConvexPiece, MinimaxModel, MultiObjectiveProblem, PiecewiseMaxFunction, SmoothFunction,
                   SubproblemError, SubproblemSolution, build_model, build_prox_model, is_critical,
                   kkt_residual, solve)
from monpg.problems import get_problem, make_synthetic_quadratic, problem_names
from monpg.subproblem import NotPositiveDefinite, forward_difference_derivatives, regularization
from oracles import brute_force_min, random_instance

X0 = np.array([3.7990, 1.8743])


def half_square(n=1):
    return MultiObjectiveProblem("half_sq", [SmoothFunction.quadratic(np.eye(n))], [PiecewiseMaxFunction.zero(n)],
                                 -np.ones(n), np.ones(n))


def symmetric_pair_model():
    """Q_1 = d + d^2/2, Q_2 = -d + d^2/2 at x = 0."""
    zero = (ConvexPiece.affine([0.0]),)
    return MinimaxModel(np.zeros(1), np.array([[1.0], [-1.0]]), np.ones((2, 1, 1)), np.zeros(2),
                        (zero, zero), 0.0)


def test_model_is_zero_at_zero_direction(rng):
    for name in problem_names():
        p = get_problem(name)
        x = rng.uniform(p.lb, p.ub)
        np.testing.assert_allclose(build_model(p, x).Q(np.zeros(p.n)), 0.0, atol=1e-12)


def test_model_value_reference_start():
    model = build_model(get_problem("P1"), X0)
    assert abs(model.value([-0.6444, 0.9601]) - (-57.4460)) <= 0.5


def test_model_single_objective_closed_form():
    model = build_model(half_square(), [1.0])
    for d in (-2.0, -0.5, 0.0, 1.5):
        assert model.Q([d])[0] == pytest.approx(d + 0.5 * d * d)


def test_solve_reference_direction():
    sol = solve(build_model(get_problem("P1"), X0))
    assert np.abs(sol.d - [-0.6444, 0.9601]).max() <= 1e-2
    assert abs(sol.t - (-57.4460)) <= 0.5
    assert sol.kkt_residual <= 1e-8
    assert kkt_residual(build_model(get_problem("P1"), X0), sol) <= 1e-8


def test_solve_at_critical_point():
    sol = solve(build_model(get_problem("P1"), [3.0, 3.0]))
    assert np.linalg.norm(sol.d) <= 1e-4 and abs(sol.t) <= 1e-4


def test_solve_symmetric_pair():
    sol = solve(symmetric_pair_model())
    assert abs(sol.d[0]) <= 1e-8 and abs(sol.t) <= 1e-8
    np.testing.assert_allclose(sol.lam, [0.5, 0.5], atol=1e-6)


def test_symmetric_pair_against_grid():
    model = symmetric_pair_model()
    grid = np.arange(-3, 3 + 1e-5, 1e-4)
    best = min(max(d + 0.5 * d * d, -d + 0.5 * d * d) for d in grid)
    assert solve(model).t == pytest.approx(best, abs=1e-8)


def test_kkt_residual_exact_and_perturbed():
    model = symmetric_pair_model()
    exact = SubproblemSolution(np.zeros(1), 0.0, np.array([0.5, 0.5]), [0, 1], 0.0)
    assert kkt_residual(model, exact) <= 1e-8
    moved = SubproblemSolution(np.array([0.1]), float(model.value([0.1])), np.array([0.5, 0.5]), [0], 0.0)
    assert kkt_residual(model, moved) > 0


def test_is_critical_examples():
    p1 = get_problem("P1")
    assert is_critical(p1, [3.0, 3.0], 1e-4)
    assert not is_critical(p1, X0, 1e-4)
    assert is_critical(half_square(2), [0.0, 0.0], 1e-4)


def test_singular_hessian_gets_regularized():
    model = build_model(get_problem("P1"), [0.0, 5.0])  # f_1 and f_2 Hessians both singular here
    assert model.mu > 0
    assert solve(model).kkt_residual <= 1e-8
    with pytest.raises(NotPositiveDefinite):
        solve(build_model(get_problem("P1"), [0.0, 5.0], mu=0.0))


def test_regularization_value():
    H = np.array([[[0.0, 0.0], [0.0, 2.0]]])
    assert regularization(H) == pytest.approx(1e-6 * 3.0)
    assert regularization(np.array([np.eye(2)])) == 0.0


def test_iteration_cap_raises_with_best_iterate():
    with pytest.raises(SubproblemError) as err:
        solve(build_model(get_problem("P1"), X0), max_newton=1)
    assert err.value.best is not None and err.value.best.d.shape == (2,)


def test_verbose_trace_is_json(caplog):
    with caplog.at_level(logging.DEBUG, logger="monpg.subproblem"):
        sol = solve(build_model(get_problem("P1"), X0), verbose=True)
    trace = json.loads(sol.trace_json())
    assert trace and {"iter", "gap", "dual_res", "t"} <= set(trace[0])


def test_forward_difference_derivatives_close_to_analytic(rng):
    p = get_problem("P1")
    for _ in range(10):
        x = rng.uniform(p.lb, p.ub)
        for f in p.smooth:
            g, H = forward_difference_derivatives(f, x)
            np.testing.assert_allclose(g, f.gradient(x), rtol=1e-4, atol=1e-3)
            np.testing.assert_allclose(H, f.hessian(x), rtol=1e-3, atol=1e-1)


def test_prox_model_uses_scaled_identity():
    model = build_prox_model(get_problem("P1"), X0, 3.0)
    np.testing.assert_array_equal(model.hessians, np.broadcast_to(3 * np.eye(2), (2, 2, 2)))


def _check_solution_properties(problem, x, sigma):
    model = build_model(problem, x)
    sol = solve(model)
    assert sol.kkt_residual <= 1e-8
    assert sol.t <= 1e-12
    assert sol.lam.min() >= 0 and abs(sol.lam.sum() - 1) <= 1e-8
    assert np.all(model.Q(sol.d) <= sol.t + 1e-8)
    if sigma > 0:
        assert sol.t <= -0.5 * sigma * sol.d @ sol.d + 1e-8
    if np.linalg.norm(sol.d) >= 1e-5:
        # descent certificate: the first-order part alone already decreases every objective
        y = x + sol.d
        for j in range(problem.m):
            lin = problem.smooth[j].gradient(x) @ sol.d + problem.nonsmooth[j].value(y) - problem.nonsmooth[j].value(x)
            assert lin < 0
    return sol


def test_solution_properties_on_every_registered_problem(rng):
    for name in problem_names():
        p = get_problem(name)
        for _ in range(10):
            _check_solution_properties(p, rng.uniform(p.lb, p.ub), p.sigma)


@settings(max_examples=25)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["SQ_n3_m3_gG17", "SQ_gD", "SQ_gE", "P1_gB"]))
def test_permutation_invariance(seed, name):
    p = get_problem(name)
    rng = np.random.default_rng(seed)
    model = build_model(p, rng.uniform(p.lb, p.ub))
    base = solve(model)
    order = rng.permutation(p.m)
    perm = solve(model.permuted(order))
    assert np.abs(perm.d - base.d).max() <= 1e-6
    assert perm.t == pytest.approx(base.t, abs=1e-8)


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1))
def test_strong_convexity_bound_random_quadratics(seed):
    p = make_synthetic_quadratic(3, 3, sigma=0.7, seed=seed % 1000, nonsmooth="gG")
    x = np.random.default_rng(seed).uniform(p.lb, p.ub)
    _check_solution_properties(p, x, 0.7)


@pytest.mark.parametrize("n,count", [(1, 10), (2, 4)])
def test_oracle_agreement_small_sample(n, count):
    rng = np.random.default_rng(100 + n)
    for _ in range(count):
        inst = random_instance(rng, n)
        v, d_grid = brute_force_min(inst)
        sol = solve(inst.model())
        assert abs(sol.t - v) <= 1e-3
        assert inst.Q_batch(sol.d[None]).max() <= inst.Q_batch(d_grid[None]).max() + 1e-6
