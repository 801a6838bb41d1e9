import numpy as np
import pytest

from nefro.errors import InfeasibleBounds
from nefro.nefropt.solver import FunctionProblem, SolverConfig, solve

from helpers import INSTANCES, grid_best, instance_problem


def quad(x):
    return -(x[0] - 3.0) ** 2, np.array([-2.0 * (x[0] - 3.0)])


def test_analytic_unconstrained_quadratic():
    r = solve(FunctionProblem(quad, [0.0], [10.0], maximize=True))
    assert r.converged
    assert abs(r.x[0] - 3.0) <= 1e-6
    assert abs(r.optimal_value) <= 1e-10
    assert r.kkt_residual < 1e-6


def test_solver_deterministic():
    p = FunctionProblem(quad, [0.0], [10.0], maximize=True)
    a, b = solve(p), solve(p)
    assert a.iterations == b.iterations and a.optimal_value == b.optimal_value
    assert np.array_equal(a.x, b.x)


def test_empty_bounds():
    with pytest.raises(InfeasibleBounds):
        solve(FunctionProblem(quad, [1.0], [0.0]))


def test_iteration_budget_exhaustion_keeps_point():
    def rosen(x):
        f = (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2
        g = np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)])
        return f, g

    r = solve(FunctionProblem(rosen, [-2.0, -1.0], [2.0, 3.0]), SolverConfig(max_iter=5))
    assert not r.converged and r.status == "max_iter"
    assert r.iterations <= 5
    assert np.all(r.x >= [-2.0, -1.0]) and np.all(r.x <= [2.0, 3.0])


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tolerance=0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)


def test_start_point_and_degenerate_variable():
    # a fixed variable (lo == hi) stays put
    p = FunctionProblem(lambda x: (-(x[0] - 1) ** 2 - x[1], np.array([-2 * (x[0] - 1), -1.0])),
                        [0.0, 2.0], [4.0, 2.0], maximize=True)
    r = solve(p, x0=[3.5, 2.0])
    assert r.x[1] == 2.0 and abs(r.x[0] - 1) < 1e-6


# -- 2-variable instances against an exhaustive grid ------------------------------------

@pytest.mark.parametrize("name", sorted(INSTANCES))
def test_two_variable_instance_matches_grid(name):
    inst = INSTANCES[name]
    r = solve(instance_problem(inst))
    assert r.converged
    best = grid_best(inst)
    assert abs(r.optimal_value - best) <= 0.01 * abs(best)
    # feasibility of the returned point
    for g in inst["g"]:
        assert g(r.x)[0] <= 1e-6


def test_equality_constrained_instance():
    # maximise xy on x + y = 3: the line parameterisation is the oracle
    prob = FunctionProblem(
        lambda x: (x[0] * x[1], np.array([x[1], x[0]])), [0.0, 0.0], [4.0, 4.0],
        equalities=lambda x: (np.array([x[0] + x[1] - 3]), np.array([[1.0, 1.0]])), n_eq=1, maximize=True)
    r = solve(prob)
    t = np.linspace(0, 3, 2001)
    best = float(np.max(t * (3 - t)))
    assert r.converged and abs(r.optimal_value - best) <= 0.01 * best
    assert abs(r.x.sum() - 3) < 1e-6


def test_violation_history_is_monotone_for_function_problem():
    inst = INSTANCES["parabola_region"]
    h = solve(instance_problem(inst)).violation_history
    assert len(h) >= 2
    assert all(b <= a for a, b in zip(h, h[1:]))


def test_result_dict():
    d = solve(FunctionProblem(quad, [0.0], [10.0], maximize=True)).to_dict()
    assert set(d) == {"optimal_value", "iterations", "wall_time_ms", "converged", "kkt_residual", "status"}
