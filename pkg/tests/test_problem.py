import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nefro import coexsim as cs
from nefro.errors import InfeasibleBounds
from nefro.nefropt.problem import (
    P_MAX_DBM,
    Cir,
    ConstraintKind,
    Objective,
    Relation,
    build_problem,
    constraint_select,
    demand_floor,
    link_budget,
    shannon_se,
)
from nefro.nefropt.solver import solve

from helpers import grid_capacity_optimum, one_node_budget, shannon_link, two_node_budget

TH, LR = ConstraintKind.THEORETICAL, ConstraintKind.LEARNED_CIR
CAP, SINR = Objective.MAX_CAPACITY, Objective.MAX_SINR


def fitted_cir(budget, lo=-5.0, hi=45.0, node=0):
    """Least-squares quadratic through the node's own Shannon curve (Mbps vs dB)."""
    s = np.linspace(lo, hi, 400)
    c = budget.airtime[node] * budget.bandwidth_mhz * shannon_se(s)
    c2, c1, c0 = np.polyfit(s, c, 2)
    return Cir((c0, c1, c2))


def family(seed=0, every=4):
    for cfg in cs.all_scenarios(seed)[::every]:
        yield cfg, link_budget(cfg)


# -- builder ------------------------------------------------------------------

def test_single_node_capacity_at_max_power_full_airtime():
    b = one_node_budget()
    prob = build_problem(b, CAP, TH)
    r = solve(prob)
    assert r.converged
    assert r.x[prob.sl_p][0] == pytest.approx(P_MAX_DBM, abs=1e-4)
    assert r.x[prob.sl_a][0] == pytest.approx(1.0, abs=1e-4)
    s = b.sinr_db([P_MAX_DBM])[0]
    assert r.optimal_value == pytest.approx(20.0 * shannon_se(s), rel=1e-5)


def test_concavity_flag():
    b = two_node_budget()
    assert build_problem(b, CAP, LR, Cir((1.0, 2.0, -0.01))).concave
    assert not build_problem(b, CAP, LR, Cir((1.0, 2.0, 0.01))).concave
    assert build_problem(b, CAP, LR, Cir((1.0, 2.0, -0.01))).describe()["sinr_scale"] == "dB"


def test_builder_errors():
    b = two_node_budget()
    with pytest.raises(ValueError):
        build_problem(b, CAP, LR)
    with pytest.raises(ValueError):
        build_problem(b, CAP, LR, Cir((0.0, 1.0, 0.0), Relation.SINR_OF_CAPACITY))
    with pytest.raises(ValueError):
        Cir((1.0, 2.0))
    # demanded SINR above anything the link can reach
    with pytest.raises(InfeasibleBounds):
        build_problem(b, SINR, LR, Cir((200.0, 0.0, 0.0), Relation.SINR_OF_CAPACITY))


def test_bounds_nonempty_and_power_window():
    for _, b in family():
        for obj in Objective:
            p = build_problem(b, obj, TH)
            assert np.all(p.lo <= p.hi)
            assert np.all(p.lo[p.sl_p] == 10.0) and np.all(p.hi[p.sl_p] == 23.0)
            if p.theoretical:
                assert np.all(p.lo[p.sl_a] == 0.0) and np.all(p.hi[p.sl_a] <= 1.0)


def test_demand_floor_is_half_weakest_reference_link():
    _, b = next(family())
    s = b.sinr_db(np.full(len(b.lte), P_MAX_DBM))
    ref = np.asarray(b.airtime)[list(b.lte)] * b.bandwidth_mhz * shannon_se(s)
    assert demand_floor(b) == pytest.approx(0.5 * ref.min())


# -- derivatives ------------------------------------------------------------------

def _fd_check(prob, x, fn):
    val, jac = fn(x)
    eps = 1e-6
    num = np.zeros_like(jac)
    for j in range(len(x)):
        d = np.zeros_like(x)
        d[j] = eps * max(1.0, abs(x[j]))
        num[:, j] = (fn(x + d)[0] - fn(x - d)[0]) / (2 * d[j])
    np.testing.assert_allclose(jac, num, rtol=1e-5, atol=1e-6)


@given(st.integers(0, 31), st.sampled_from(list(Objective)), st.sampled_from(["th", "cs", "sc"]),
       st.integers(0, 2**31))
def test_jacobians_match_finite_differences(idx, obj, kind, seed):
    cfg = cs.all_scenarios(0)[idx]
    b = link_budget(cfg)
    if kind == "th":
        prob = build_problem(b, obj, TH)
    elif kind == "cs":
        prob = build_problem(b, obj, LR, Cir((1.2, 1.1, 0.02)))
    else:
        if obj is CAP:
            return
        prob = build_problem(b, obj, LR, Cir((5.0, 0.2, -0.001), Relation.SINR_OF_CAPACITY))
    x = prob.lo + np.random.default_rng(seed).uniform(0.1, 0.9, prob.n_var) * (prob.hi - prob.lo)
    _fd_check(prob, x, prob.equalities)
    if prob.n_in:
        _fd_check(prob, x, prob.inequalities)


def test_sinr_equality_agrees_with_link_budget():
    for _, b in family():
        prob = build_problem(b, CAP, TH)
        p = np.linspace(11, 22, len(b.lte))
        a = prob._a_mac
        s = b.sinr_db(p, a)
        x = np.concatenate([p, s, a, np.zeros(len(b.lte))])
        h, _ = prob.equalities(x)
        assert np.abs(h[: len(b.lte)]).max() < 1e-9


# -- optima ------------------------------------------------------------------

# Weak cross-coupling (>= 25 dB isolation) keeps the sum-capacity landscape
# single-peaked over the power box; under strong coupling the symmetric
# stationary point is a saddle and a local method started at the midpoint can
# stop there, which a grid search would not.
WEAK = [(-85.0, 3.0, -60.0), (-85.0, 3.0, -65.0), (-90.0, 3.0, -60.0),
        (-90.0, 6.0, -65.0), (-95.0, 0.0, -60.0), (-95.0, 6.0, -65.0)]


@pytest.mark.parametrize("cross,asym,direct", WEAK)
def test_two_node_theoretical_matches_power_grid(cross, asym, direct):
    b = two_node_budget(cross_db=cross, asym=asym, direct_db=direct)
    r = solve(build_problem(b, CAP, TH))
    best, _ = grid_capacity_optimum(b, shannon_link(b))
    assert r.converged
    assert abs(r.optimal_value - best) <= 0.01 * best


@pytest.mark.parametrize("cross,asym,direct", WEAK)
def test_two_node_learned_matches_power_grid(cross, asym, direct):
    b = two_node_budget(cross_db=cross, asym=asym, direct_db=direct)
    cir = fitted_cir(b)
    r = solve(build_problem(b, CAP, LR, cir))
    best, _ = grid_capacity_optimum(b, lambda s, i: cir(s))
    assert r.converged
    assert abs(r.optimal_value - best) <= 0.01 * abs(best)


@pytest.mark.parametrize("cross,asym,direct", WEAK)
def test_accuracy_bound_on_two_node_instances(cross, asym, direct):
    b = two_node_budget(cross_db=cross, asym=asym, direct_db=direct)
    base = build_problem(b, CAP, TH)
    cir = fitted_cir(b)
    learned = build_problem(b, CAP, LR, cir)
    s = np.linspace(learned.lo[learned.sl_s].min(), learned.hi[learned.sl_s].max(), 2001)
    eps = float(np.max(np.abs(cir(s) - b.airtime[0] * b.bandwidth_mhz * shannon_se(s))))
    gb, _ = grid_capacity_optimum(b, shannon_link(b))
    gl, _ = grid_capacity_optimum(b, lambda s_, i: cir(s_))
    assert abs(gb - gl) <= 2 * eps + 1e-9
    rb, rl = solve(base), solve(learned)
    assert rb.converged and rl.converged
    slack = 1e-3 * abs(rb.optimal_value)
    assert abs(rb.optimal_value - rl.optimal_value) <= 2 * eps + slack


@pytest.mark.parametrize("obj", list(Objective))
def test_two_node_symmetric_optimum(obj):
    # Noise-limited coupling: with interference far above noise the SINRs depend
    # only on the power difference and the common-power direction is flat.
    b = two_node_budget(cross_db=-90.0)
    r = solve(build_problem(b, obj, TH))
    prob = build_problem(b, obj, TH)
    assert r.converged
    p = r.x[prob.sl_p]
    assert abs(p[0] - p[1]) < 1e-4
    # objective invariant under swapping the nodes
    swapped = r.x.copy()
    for sl in (prob.sl_p, prob.sl_s, prob.sl_a, prob.sl_c):
        swapped[sl] = r.x[sl][::-1]
    assert prob.objective(swapped)[0] == pytest.approx(r.optimal_value, abs=1e-9)


def test_converged_points_are_feasible():
    for _, b in family(every=3):
        for obj in Objective:
            prob = build_problem(b, obj, TH)
            r = solve(prob)
            if not r.converged:
                continue
            h, _ = prob.equalities(r.x)
            assert np.abs(h).max(initial=0) < 1e-6
            if prob.n_in:
                g, _ = prob.inequalities(r.x)
                assert g.max() < 1e-6
            assert np.all(r.x >= prob.lo - 1e-12) and np.all(r.x <= prob.hi + 1e-12)
            assert r.kkt_residual < 1e-6


def test_penalty_schedule_violation_monotone():
    for _, b in family(every=3):
        for obj in Objective:
            for prob in (build_problem(b, obj, TH), build_problem(b, obj, LR, Cir((1.0, 1.5, 0.03)))):
                h = solve(prob).violation_history
                assert all(y <= x for x, y in zip(h, h[1:]))


def test_max_sinr_respects_demand():
    _, b = next(family())
    prob = build_problem(b, SINR, TH)
    r = solve(prob)
    a = r.x[prob.sl_a]
    cap = a * b.bandwidth_mhz * shannon_se(r.x[prob.sl_s])
    assert np.all(cap >= prob.demand_mbps - 1e-4 * b.bandwidth_mhz)
    assert r.optimal_value == pytest.approx(r.x[prob.sl_s].min(), abs=1e-5)


def test_sinr_of_capacity_demand_moves_into_bound():
    _, b = next(family())
    cir = Cir((2.0, 0.3, 0.0), Relation.SINR_OF_CAPACITY)
    prob = build_problem(b, SINR, LR, cir)
    assert prob.demand_sinr_db == pytest.approx(cir(prob.demand_mbps))
    assert np.all(prob.lo[prob.sl_s] >= prob.demand_sinr_db)


# -- operation counts ------------------------------------------------------------------

def test_learned_constraints_never_cost_more_flops():
    for cfg, b in family(every=1):
        for obj in Objective:
            th = build_problem(b, obj, TH).constraint_flops()
            for rel in Relation:
                if obj is CAP and rel is Relation.SINR_OF_CAPACITY:
                    continue
                cir = Cir((1.0, 1.0, 0.01)) if rel is Relation.CAPACITY_OF_SINR else Cir((0.0, 0.01, 0.0), rel)
                lr = build_problem(b, obj, LR, cir).constraint_flops()
                assert lr <= th


# -- selector ------------------------------------------------------------------

class _M:
    def __init__(self, rmv):
        self.rmv_cv_mean, self.rmv = rmv, rmv


class _R:
    def __init__(self, degree, rmv):
        self.chosen_degree, self.chosen_metrics = degree, _M(rmv)


def test_constraint_select_gates():
    assert constraint_select(_R(2, 0.9)) is LR
    assert constraint_select(_R(1, 0.6)) is LR
    assert constraint_select(_R(3, 0.95)) is TH
    assert constraint_select(_R(2, 0.3)) is TH
    assert constraint_select(_R(2, 0.7), rmv_floor=0.8) is TH


def test_constraint_select_on_real_reports(seed0_reports):
    for r in seed0_reports.values():
        k = constraint_select(r)
        assert (k is LR) == (r.chosen_degree <= 2 and r.chosen_metrics.rmv_cv_mean >= 0.6)
