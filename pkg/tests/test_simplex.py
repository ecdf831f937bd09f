import numpy as np
import pytest
import scipy.sparse as sp

from wcaro.lpmodel import LpModel
from wcaro.simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LpParams, solve_lp

from .helpers import linprog_value, random_lp

ENGINES = ("native", "highs")


@pytest.mark.parametrize("engine", ENGINES)
def test_single_row_min(engine):
    m = LpModel.build([1.0], [[1.0]], [">"], [3.0], lower=[-np.inf])
    sol = solve_lp(m, LpParams(engine=engine))
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(3.0)
    assert sol.dual_rows[0] == pytest.approx(1.0)


@pytest.mark.parametrize("engine", ENGINES)
def test_unbounded(engine):
    m = LpModel.build([1.0], [[1.0]], [">"], [3.0], sense="max")
    assert solve_lp(m, LpParams(engine=engine)).status == UNBOUNDED


@pytest.mark.parametrize("engine", ENGINES)
def test_infeasible(engine):
    m = LpModel.build([0.0], [[1.0], [-1.0]], [">", ">"], [1.0, 0.0], lower=[-np.inf])
    sol = solve_lp(m, LpParams(engine=engine))
    assert sol.status == INFEASIBLE
    assert sol.objective == np.inf


def test_empty_model():
    m = LpModel.build([1.0, -1.0], sp.csr_matrix((0, 2)), [], [], lower=[0, 0], upper=[1, 2])
    sol = solve_lp(m)
    assert sol.objective == pytest.approx(-2.0)


@pytest.mark.parametrize("seed", range(40))
def test_matches_highs_and_duality(seed):
    m = random_lp(seed)
    sol = solve_lp(m)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(linprog_value(m), rel=1e-7, abs=1e-7)
    # primal feasibility
    assert m.primal_residual(sol.primal) <= 1e-7
    # strong duality: c x = b' y + bound terms via reduced costs
    act = m.row_activity(sol.primal)
    dual_obj = sol.dual_rows @ m.rhs + sol.reduced_costs @ sol.primal
    assert dual_obj == pytest.approx(sol.objective - m.obj_const, rel=1e-7, abs=1e-6)
    # complementary slackness on rows
    slack = act - m.rhs
    assert np.max(np.abs(sol.dual_rows * slack)) <= 1e-6 * (1 + np.abs(m.rhs).max())
    # reduced costs: c - A' y
    rc = m.obj - m.a_mat.T @ sol.dual_rows
    np.testing.assert_allclose(sol.reduced_costs, rc, atol=1e-7)


@pytest.mark.parametrize("seed", range(10))
def test_dual_signs(seed):
    m = random_lp(seed)
    sol = solve_lp(m)
    # sensitivity duals: raising a >= rhs cannot lower a min or raise a max
    sgn = 1.0 if m.sense == "min" else -1.0
    assert np.all(sgn * sol.dual_rows[m.senses == ">"] >= -1e-9)
    assert np.all(sgn * sol.dual_rows[m.senses == "<"] <= 1e-9)


def test_deterministic():
    m = random_lp(3)
    a, b = solve_lp(m), solve_lp(m)
    assert a.objective == b.objective
    np.testing.assert_array_equal(a.primal, b.primal)
    np.testing.assert_array_equal(a.dual_rows, b.dual_rows)
    assert a.iterations == b.iterations


@pytest.mark.parametrize("seed", range(10))
def test_warm_start_after_bound_change(seed):
    m = random_lp(seed)
    first = solve_lp(m)
    j = int(np.argmax(np.abs(first.primal)))
    up = m.upper.copy()
    up[j] = first.primal[j] - 0.5 * abs(first.primal[j]) if first.primal[j] > 0 else up[j]
    lo = m.lower.copy()
    if first.primal[j] <= 0:
        lo[j] = first.primal[j] + 0.5
    tight = m.with_bounds(lo, up)
    warm = solve_lp(tight, warm_start=first.basis)
    cold = solve_lp(tight)
    assert warm.status == cold.status
    if cold.status == OPTIMAL:
        assert warm.objective == pytest.approx(cold.objective, rel=1e-8, abs=1e-8)


def test_degenerate_cycling_example():
    # a classical cycling example for textbook pivot rules
    c = [-0.75, 150.0, -0.02, 6.0]
    a = [[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]]
    m = LpModel.build(c, a, ["<", "<", "<"], [0.0, 0.0, 1.0])
    sol = solve_lp(m, LpParams(bland_after=1))
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(-0.05)


def test_unknown_engine():
    with pytest.raises(ValueError):
        solve_lp(random_lp(0), LpParams(engine="nope"))


def test_max_sense_duals_follow_sensitivity():
    # max x + y s.t. x + y <= 4: d obj / d rhs = 1
    m = LpModel.build([1.0, 1.0], [[1.0, 1.0]], ["<"], [4.0], sense="max")
    sol = solve_lp(m)
    assert sol.objective == pytest.approx(4.0)
    assert sol.dual_rows[0] == pytest.approx(1.0)
