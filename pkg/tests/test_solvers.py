import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monpg import (ConvexPiece, InvalidArgument, MultiObjectiveProblem, PiecewiseMaxFunction, SmoothFunction,
                   build_model, is_critical, solve)
from monpg.problems import get_problem, make_synthetic_quadratic, quadratic_problem
from monpg.solvers import (LineSearchStall, RunResult, SolverConfig, UnsupportedProblem, armijo_search,
                           monpg_run, mopg_run, scalarize, weight_grid, weighted_sum_run)

X0 = np.array([3.7990, 1.8743])
W_STAR = np.array([0.18637886, 0.81362114])


def half_square(n=1, lb=-1.0, ub=1.0):
    return MultiObjectiveProblem("half_sq", [SmoothFunction.quadratic(np.eye(n))], [PiecewiseMaxFunction.zero(n)],
                                 lb * np.ones(n), ub * np.ones(n))


def symmetric_pair():
    return quadratic_problem("pair", [[[1.0]], [[1.0]]], [[1.0], [-1.0]])


def test_armijo_reference_full_step():
    p = get_problem("P1")
    sol = solve(build_model(p, X0))
    assert armijo_search(p, X0, sol.d, sol.t) == 1.0


def test_armijo_unit_step_scalar():
    assert armijo_search(half_square(), [1.0], [-1.0], -0.5) == 1.0


def test_armijo_bad_direction_backtracks_to_eighth():
    # 0.5 (1 - 10 a)^2 <= 0.5 - 0.05 a first holds at a = 1/8
    assert armijo_search(half_square(), [1.0], [-10.0], -0.5, SolverConfig(beta=0.1, r=0.5)) == 0.125


def test_armijo_requires_negative_t():
    with pytest.raises(InvalidArgument):
        armijo_search(half_square(), [1.0], [-1.0], 0.0)


def test_armijo_stall_reported():
    with pytest.raises(LineSearchStall):
        armijo_search(half_square(), [1.0], [1.0], -0.5, SolverConfig(max_backtracks=5))


def test_monpg_reference_trajectory():
    res = monpg_run(get_problem("P1"), X0)
    assert res.termination == "critical"
    assert res.iterations <= 10
    first = res.trajectory[0]
    assert first.alpha == 1.0
    np.testing.assert_allclose(res.trajectory[1].x, [3.1546, 2.8344], atol=1e-2)
    np.testing.assert_allclose(res.x, [3.0, 3.0], atol=1e-2)
    assert res.d_norm < 1e-5


def test_monpg_zero_iterations_at_critical_point():
    res = monpg_run(get_problem("P1"), [3.0, 3.0])
    assert res.termination == "critical" and res.iterations == 0


def test_monpg_single_newton_step():
    res = monpg_run(half_square(2, -5, 5), [1.0, 1.0])
    assert res.iterations == 1
    np.testing.assert_allclose(res.trajectory[0].d, [-1.0, -1.0], atol=1e-8)
    np.testing.assert_allclose(res.x, [0.0, 0.0], atol=1e-8)


def test_mopg_unit_curvature_step():
    res = mopg_run(half_square(), [1.0], ell=1.0)
    np.testing.assert_allclose(res.trajectory[0].d, [-1.0], atol=1e-8)
    assert res.iterations == 1 and abs(res.x[0]) <= 1e-8


def test_mopg_reference_converges_no_faster_than_monpg():
    p = get_problem("P1")
    pg = mopg_run(p, X0)
    newton = monpg_run(p, X0)
    assert pg.termination == "critical"
    assert pg.iterations >= newton.iterations
    # a proximal-gradient critical point is also critical for the Newton model
    assert is_critical(p, pg.x, 1e-3)


def test_mopg_adaptive_ell_recorded():
    res = mopg_run(get_problem("P1"), X0, SolverConfig(max_iter=3))
    assert all(rec.ell is not None and rec.ell >= 1 for rec in res.trajectory)


def test_weighted_sum_unit_weight_is_critical_for_first_objective():
    p = get_problem("P1")
    res = weighted_sum_run(p, [1.0, 0.0], [1.0, 1.0])
    f1 = MultiObjectiveProblem("F1", [p.smooth[0]], [p.nonsmooth[0]], p.lb, p.ub)
    assert res.termination == "critical"
    assert is_critical(f1, res.x, 1e-4)


def test_weighted_sum_certificate_weight_reaches_three_three():
    res = weighted_sum_run(get_problem("P1"), W_STAR, X0)
    np.testing.assert_allclose(res.x, [3.0, 3.0], atol=1e-2)


def test_weighted_sum_symmetric_pair():
    res = weighted_sum_run(symmetric_pair(), [0.5, 0.5], [3.0])
    assert abs(res.x[0]) <= 1e-6


def test_scalarize_piece_product():
    p = get_problem("P1")
    s = scalarize(p, [0.5, 0.5])
    assert s.m == 1 and len(s.nonsmooth[0].pieces) == 4
    x = np.array([0.3, -1.2])
    assert s.F(x)[0] == pytest.approx(0.5 * p.F(x).sum())
    # a zero weight drops that objective's pieces
    assert len(scalarize(p, [1.0, 0.0]).nonsmooth[0].pieces) == 2


def test_scalarize_cap():
    g = PiecewiseMaxFunction(tuple(ConvexPiece.affine([k / 100.0]) for k in range(101)))
    f = SmoothFunction.quadratic(np.eye(1))
    p = MultiObjectiveProblem("many", [f, f], [g, g], [-1], [1])
    with pytest.raises(UnsupportedProblem):
        scalarize(p, [0.5, 0.5])


def test_scalarize_rejects_off_simplex():
    with pytest.raises(InvalidArgument):
        scalarize(get_problem("P1"), [0.7, 0.7])


def test_weight_grid_two_objectives():
    W = weight_grid(2, 100)
    assert W.shape == (100, 2)
    np.testing.assert_allclose(W.sum(axis=1), 1.0)
    assert [1.0, 0.0] in W.tolist() and [0.0, 1.0] in W.tolist()


def test_weight_grid_three_objectives_lattice():
    W = weight_grid(3, 100)
    assert W.shape == (105, 3)
    assert W.min() >= 0
    np.testing.assert_allclose(W.sum(axis=1), 1.0)
    for e in np.eye(3).tolist():
        assert e in W.tolist()
    assert np.array_equal(W, weight_grid(3, 100))


def test_synthetic_single_objective_one_newton_step(rng):
    p = make_synthetic_quadratic(3, 1, sigma=1.0, seed=5)
    c = np.linalg.solve(p.smooth[0].hessian(np.zeros(3)), -p.smooth[0].gradient(np.zeros(3)))
    res = monpg_run(p, rng.uniform(p.lb, p.ub))
    assert res.iterations == 1
    np.testing.assert_allclose(res.x, c, atol=1e-8)


def test_synthetic_pair_ends_on_segment(rng):
    e1 = np.array([1.0, 0.0])
    p = quadratic_problem("seg", [np.eye(2), np.eye(2)], [e1, -e1])
    for _ in range(10):
        res = monpg_run(p, rng.uniform(p.lb, p.ub))
        assert abs(res.x[1]) <= 1e-5 and -1 - 1e-5 <= res.x[0] <= 1 + 1e-5


def test_forward_difference_mode_solves_p1():
    res = monpg_run(get_problem("P1"), X0, SolverConfig(derivatives="forward-difference"))
    assert res.termination == "critical"
    np.testing.assert_allclose(res.x, [3.0, 3.0], atol=1e-2)


def test_config_validation():
    for bad in ({"beta": 1.0}, {"r": 0.0}, {"eps": 0.0}, {"max_iter": 0}, {"derivatives": "autodiff"},
                {"ell": -1.0}):
        with pytest.raises(InvalidArgument):
            SolverConfig(**bad)
    with pytest.raises(InvalidArgument):
        SolverConfig.from_dict({"gamma": 1})
    cfg = SolverConfig()
    assert (cfg.beta, cfg.r, cfg.eps, cfg.max_iter, cfg.subproblem_tol, cfg.max_backtracks) == \
        (0.1, 0.5, 1e-5, 200, 1e-8, 60)
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg


def test_run_result_serialization():
    res = monpg_run(get_problem("P1"), X0)
    data = json.loads(res.to_json())
    assert data["termination"] == "critical" and len(data["trajectory"]) == res.iterations + 1
    assert "trajectory" not in json.loads(res.to_json(trajectory=False))
    row = res.csv_row()
    assert len(row) == len(RunResult.csv_header(2))
    assert row[:4] == ["P1", "monpg", "0", str(res.iterations)]


def _check_run(problem, res, config):
    sigma, L = problem.sigma, problem.L
    F0 = res.trajectory[0].F
    steps = [rec for rec in res.trajectory if rec.alpha is not None]
    for k, rec in enumerate(steps):
        nxt = res.trajectory[k + 1]
        assert rec.t < 0
        assert np.all(nxt.F <= rec.F + config.beta * rec.alpha * rec.t)
        assert np.all(nxt.F <= F0)
        if sigma > 0 and res.solver == "monpg":
            assert rec.t <= -0.5 * sigma * rec.d @ rec.d + 1e-6
            if L is not None:
                assert rec.alpha >= min(1.0, sigma * (1 - config.beta) * config.r / L)
    if res.termination == "critical" and res.solver == "monpg":
        assert is_critical(problem, res.x, config.eps * 10)


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.sampled_from(["H1", "SQ_n3_m2_gG14", "SQ_n2_m3_gG16", "SQ_n2_m2_s1"]))
def test_descent_invariants_hold_from_random_starts(seed, name):
    p = get_problem(name)
    x0 = np.random.default_rng(seed).uniform(p.lb, p.ub)
    cfg = SolverConfig()
    for run in (monpg_run, mopg_run):
        res = run(p, x0, cfg)
        assert res.termination in ("critical", "max_iter")
        _check_run(p, res, cfg)


def test_counters_monotone_and_consistent():
    res = monpg_run(get_problem("P1"), X0)
    c = res.counter
    assert c.n_it == res.iterations
    assert c.n_grad == c.n_hess == 2 * (c.n_it + 1)
    assert c.n_f >= 2 * (c.n_it + 1)
