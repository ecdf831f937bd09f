import itertools
from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp

from wcaro.branch_bound import solve_mip
from wcaro.exceptions import DimensionMismatch, MissingBetaBounds
from wcaro.lpmodel import LpModel
from wcaro.model import Polytope, shift_h_lower_bound, standardize_omega
from wcaro.oracle import (adversarial_value, enumerate_vertices, random_instance, toy_t1,
                          toy_t2)
from wcaro.reformulate import (build_mccormick_relaxation, build_single_level,
                               build_third_level_primal, check_structure, dualize_lp)
from wcaro.simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, solve_lp

from .helpers import linprog_value, random_lp


def test_dualize_one_row():
    m = LpModel.build([1.0], [[1.0]], [">"], [1.0], lower=[-np.inf])
    d, dmap = dualize_lp(m)
    assert d.sense == "max"
    assert d.n_vars == 1 and d.n_rows == 1
    assert d.senses[0] == "=" and d.lower[0] == 0.0
    assert solve_lp(d).objective == pytest.approx(1.0)
    assert dmap.dual_of_row(0) == 0 and dmap.dual_row_of_col(0) == 0


def test_dualize_t1_third_level():
    p = build_third_level_primal(toy_t1(), [0.0], [1.0])
    d, _ = dualize_lp(p)
    assert solve_lp(p).objective == pytest.approx(1.0)
    assert solve_lp(d).objective == pytest.approx(1.0)


def test_dual_of_infeasible_is_unbounded():
    m = LpModel.build([0.0], [[0.0]], [">"], [1.0], lower=[-np.inf])
    assert solve_lp(m).status == INFEASIBLE
    assert solve_lp(dualize_lp(m)[0]).status == UNBOUNDED


@pytest.mark.parametrize("seed", range(30))
def test_strong_duality_random(seed):
    m = random_lp(seed)
    v = linprog_value(m)
    d, _ = dualize_lp(m)
    vd = solve_lp(d).objective
    assert abs(v - vd) <= 1e-6 * (1 + abs(v))


@pytest.mark.parametrize("seed", range(10))
def test_dual_of_dual(seed):
    m = random_lp(seed)
    dd, _ = dualize_lp(dualize_lp(m)[0])
    assert solve_lp(dd).objective == pytest.approx(solve_lp(m).objective, rel=1e-7, abs=1e-7)


def test_dual_sign_conventions():
    # min x1 + x2, rows: >=, <=, =; x1 >= 0 free above, x2 free
    m = LpModel.build([1.0, 1.0], [[1, 0], [0, 1], [1, 1]], [">", "<", "="], [1.0, 5.0, 3.0],
                      lower=[0.0, -np.inf])
    d, dmap = dualize_lp(m)
    ge, le, eq = (dmap.dual_of_row(i) for i in range(3))
    assert d.lower[ge] == 0 and d.upper[ge] == np.inf
    assert d.upper[le] == 0 and d.lower[le] == -np.inf
    assert d.lower[eq] == -np.inf and d.upper[eq] == np.inf
    assert d.senses[dmap.dual_row_of_col(0)] == "<"  # x1 >= 0 in a min
    assert d.senses[dmap.dual_row_of_col(1)] == "="  # free column
    assert solve_lp(d).objective == pytest.approx(solve_lp(m).objective)


def test_third_level_rows_t1():
    p = build_third_level_primal(toy_t1(), [0.0], [1.0])
    assert p.n_rows == 2
    assert solve_lp(p).objective == pytest.approx(1.0)


def test_third_level_t2_fixings():
    t2 = toy_t2()
    p1 = build_third_level_primal(t2, [], [0.9], [1.0])
    p0 = build_third_level_primal(t2, [], [0.9], [0.0])
    # fixing rows: one >= and one <= per binary
    assert p1.n_rows == 1 + 2 + 1
    assert solve_lp(p1).objective == pytest.approx(0.6)
    assert solve_lp(p0).objective == pytest.approx(0.9)


def test_third_level_dimension_checks():
    with pytest.raises(DimensionMismatch):
        build_third_level_primal(toy_t1(), [0.0, 1.0], [1.0])
    with pytest.raises(DimensionMismatch):
        build_third_level_primal(toy_t2(), [], [0.5], [1.0, 0.0])


@pytest.mark.parametrize("x, value", [(0.0, 1.0), (2.0, 0.0)])
def test_mccormick_t1(x, value):
    relax = build_mccormick_relaxation(toy_t1(), [x])
    names = relax.var_names
    for prefix in ("alpha", "beta", "h", "eta", "kappa", "rho"):
        assert any(nm.startswith(prefix) for nm in names), prefix
    assert solve_lp(relax).objective == pytest.approx(value, abs=1e-9)


def test_mccormick_needs_beta_bounds():
    inst = toy_t1()
    tl = replace(inst.third, beta_lower=None, beta_upper=None)
    with pytest.raises(MissingBetaBounds):
        build_mccormick_relaxation(replace(inst, third=tl), [0.0])


def test_mccormick_requires_normalized_omega():
    inst = next(i for i in map(random_instance, range(50)) if np.any(i.omega.h_lower))
    with pytest.raises(ValueError):
        build_mccormick_relaxation(inst, np.zeros(inst.n_x))


def test_mccormick_envelope_only_on_bh_support():
    inst, _ = shift_h_lower_bound(random_instance(5))
    relax = build_mccormick_relaxation(inst, np.zeros(inst.n_x),
                                       np.zeros(inst.third.n_bin) if inst.third.n_bin else None)
    n_kappa = sum(nm.startswith("kappa") for nm in relax.var_names)
    assert n_kappa == inst.third.nnz_bh


@pytest.mark.parametrize("seed", range(12))
def test_mccormick_exact_with_pinned_beta(seed):
    inst, _ = shift_h_lower_bound(random_instance(seed, pinned=True))
    tl = inst.third
    x = solve_lp(inst.first.feasible_set.as_lp()).primal
    for yf in itertools.islice(itertools.product((0.0, 1.0), repeat=tl.n_bin), 4):
        yf = np.asarray(yf)
        relax = build_mccormick_relaxation(inst, x, yf if tl.n_bin else None)
        exact = -np.inf
        for v in enumerate_vertices(inst.omega):
            exact = max(exact, solve_lp(build_third_level_primal(inst, x, v,
                                                                 yf if tl.n_bin else None)).objective)
        got = solve_lp(relax).objective
        if np.isfinite(exact):
            assert got == pytest.approx(exact, rel=1e-7, abs=1e-7)


def test_single_level_t1():
    mip, layout = build_single_level(toy_t1(), return_layout=True)
    sol = solve_mip(mip)
    assert mip.n_bin == 0
    assert sol.objective == pytest.approx(1.0)
    assert -1e-9 <= sol.primal[layout.x_slice][0] <= 1.0 + 1e-9


def test_single_level_t2():
    mip, layout = build_single_level(toy_t2(), return_layout=True)
    sol = solve_mip(mip)
    assert mip.n_bin == 1
    assert sol.objective == pytest.approx(0.6)
    assert sol.primal[layout.binary_cols][0] == pytest.approx(1.0)


def test_single_level_t2_fixed():
    mip = build_single_level(toy_t2(), y_fix=[0.0])
    assert mip.n_bin == 0
    assert solve_lp(mip.base).objective == pytest.approx(1.0)


@pytest.mark.parametrize("inst", [toy_t1(), toy_t2(), random_instance(3), random_instance(8)],
                         ids=["T1", "T2", "rand3", "rand8"])
def test_structure_signs(inst):
    mip = build_single_level(inst)
    for prefix in ("u_bplus", "u_bminus", "u_omega", "u_env1", "u_env2", "u_env3", "u_env4"):
        assert any(nm.startswith(prefix) for nm in mip.base.var_names), prefix
    assert check_structure(mip.base, inst.third.b_h) == []


def test_structure_check_detects_flip():
    mip = build_single_level(toy_t1())
    m = mip.base
    j = m.var_names.index(next(nm for nm in m.var_names if nm.startswith("u_env1")))
    lo, up = m.lower.copy(), m.upper.copy()
    lo[j], up[j] = 0.0, np.inf
    assert check_structure(m.with_bounds(lo, up)) != []


@pytest.mark.parametrize("seed", range(15))
def test_mip_equals_min_over_fixings(seed):
    inst = random_instance(seed)
    n_bin = inst.third.n_bin
    v = solve_mip(build_single_level(inst)).objective
    vals = [solve_lp(build_single_level(inst, y_fix=np.asarray(yf)).base).objective
            for yf in itertools.product((0.0, 1.0), repeat=n_bin)]
    assert v == pytest.approx(min(vals), rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("seed", range(15))
def test_upper_bound_against_oracle(seed):
    inst = random_instance(seed)
    sol = solve_mip(build_single_level(inst))
    x = sol.primal[:inst.n_x]
    adv, _, _ = adversarial_value(inst, x)
    assert sol.objective >= inst.first.value(x) + adv - 1e-6


def test_shrinking_omega_never_raises_value():
    for seed in range(8):
        inst = random_instance(seed)
        om = inst.omega
        v_full = solve_mip(build_single_level(inst)).objective
        p = om.to_polytope()
        # cut Omega by a halfspace through its box center
        w = np.ones(om.dim)
        mid = 0.5 * (om.h_lower + om.h_upper)
        cut = Polytope(sp.vstack([p.a_mat, sp.csr_matrix(w)], format="csr"),
                       np.append(p.senses, "<"), np.append(p.rhs, w @ mid), p.lower, p.upper)
        small = replace(inst, omega=standardize_omega(cut))
        v_small = solve_mip(build_single_level(small)).objective
        assert v_small <= v_full + 1e-6


def test_pwl_binaries_absent_by_default():
    inst = random_instance(2, linear_g=False)
    mip = build_single_level(inst)
    assert mip.n_bin == inst.third.n_bin
