"""Compiled kernels against the pure-Python fallback."""

import numpy as np
import pytest

from nefro import _backend
from nefro import coexsim as cs
from nefro._kernels_py import poly_cv_scores as py_cv
from nefro.nefropt.problem import Cir, ConstraintKind, Objective, build_problem, link_budget
from nefro.nefropt.solver import SolverConfig, solve
from nefro.regress import cv_orders

from helpers import two_node_budget

pytestmark = pytest.mark.skipif(_backend.compiled_kernels is None, reason="extension not built")


@pytest.mark.parametrize("degree", [1, 2, 3])
@pytest.mark.parametrize("alpha", [0.0, 0.5])
def test_cv_scores_agree(degree, alpha, rng):
    x = rng.uniform(-10, 30, 120)
    y = 3 + 0.4 * x + rng.normal(0, 1, 120)
    orders = np.ascontiguousarray(cv_orders(120, 3, 7), dtype=np.int64)
    a = np.asarray(_backend.compiled_kernels.poly_cv_scores(x, y, degree, alpha, orders, 5))
    b = np.asarray(py_cv(x, y, degree, alpha, orders, 5))
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def _problems():
    for cfg in cs.all_scenarios(0)[::2]:
        b = link_budget(cfg)
        for obj in Objective:
            yield f"TS{cfg.scenario_id}-{obj.value}-TH", build_problem(b, obj, ConstraintKind.THEORETICAL)
        yield f"TS{cfg.scenario_id}-CAP-LR", build_problem(
            b, Objective.MAX_CAPACITY, ConstraintKind.LEARNED_CIR, Cir((1.0, 1.4, 0.02)))


@pytest.mark.parametrize("name,prob", list(_problems()), ids=lambda v: v if isinstance(v, str) else "")
def test_solve_values_agree(name, prob):
    rc = solve(prob, backend="compiled")
    rp = solve(prob, backend="python")
    assert rc.converged == rp.converged
    if rc.converged:
        assert rc.optimal_value == pytest.approx(rp.optimal_value, rel=1e-5, abs=1e-6)


@pytest.mark.parametrize("steps", [1, 5, 30])
@pytest.mark.parametrize("obj", list(Objective))
def test_same_algorithm_step_for_step(obj, steps):
    # Summation order differs between the backends; rounding drift is amplified
    # over long runs, so only truncated runs are compared iterate by iterate.
    b = two_node_budget(cross_db=-95.0)
    prob = build_problem(b, obj, ConstraintKind.THEORETICAL)
    cfg = SolverConfig(max_iter=steps)
    rc, rp = solve(prob, cfg, backend="compiled"), solve(prob, cfg, backend="python")
    assert rc.iterations == rp.iterations == steps
    np.testing.assert_allclose(rc.x, rp.x, rtol=1e-9, atol=1e-9)
