from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.spatial import HalfspaceIntersection

from wcaro.branch_bound import solve_mip
from wcaro.exceptions import TooLarge
from wcaro.model import Polytope, standardize_omega
from wcaro.oracle import (adversarial_value, binary_assignments, certify, enumerate_vertices,
                          random_instance, toy_t1, toy_t2)
from wcaro.reformulate import build_single_level, build_third_level_primal
from wcaro.simplex import solve_lp


def _vertex_set(vs):
    return {tuple(np.round(v, 9)) for v in vs}


def test_interval_vertices():
    om = standardize_omega(Polytope.build(dim=1, lower=[0.0], upper=[1.0]))
    assert _vertex_set(enumerate_vertices(om)) == {(0.0,), (1.0,)}


def test_simplex_vertices():
    om = standardize_omega(Polytope.build([[1.0, 1.0]], ["<"], [1.0], lower=[0, 0]))
    assert _vertex_set(enumerate_vertices(om)) == {(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)}


def test_cut_box_vertices_match_halfspace_intersection():
    # box [0,5]^2 with the corner below h1 + h2 = 2.5 removed
    p = Polytope.build([[-1.0, -1.0]], ["<"], [-2.5], lower=[0, 0], upper=[5, 5])
    got = _vertex_set(enumerate_vertices(standardize_omega(p)))
    halfspaces = np.array([[-1, -1, 2.5], [1, 0, -5], [0, 1, -5], [-1, 0, 0], [0, -1, 0]],
                          dtype=float)
    ref = HalfspaceIntersection(halfspaces, np.array([3.0, 3.0])).intersections
    assert got == _vertex_set(ref)
    assert len(got) == 5
    assert {(5.0, 5.0), (0.0, 2.5), (2.5, 0.0), (5.0, 0.0), (0.0, 5.0)} == got


def test_vertices_sorted_and_unique():
    om = random_instance(4).omega
    vs = enumerate_vertices(om)
    keys = [tuple(v) for v in vs]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)


def test_vertex_cap():
    om = standardize_omega(Polytope.build(dim=7, lower=np.zeros(7), upper=np.ones(7)))
    with pytest.raises(TooLarge):
        enumerate_vertices(om)


def test_binary_cap():
    with pytest.raises(TooLarge):
        binary_assignments(11)
    assert len(binary_assignments(3)) == 8


@pytest.mark.parametrize("x, value", [(0.0, 1.0), (2.0, 0.0)])
def test_t1_adversarial(x, value):
    v, h, _ = adversarial_value(toy_t1(), [x])
    assert v == pytest.approx(value)
    if x == 0.0:
        np.testing.assert_allclose(h, [1.0])


def test_t2_adversarial():
    v, h, y = adversarial_value(toy_t2(), [])
    assert v == pytest.approx(0.6)
    np.testing.assert_allclose(y, [1.0])
    np.testing.assert_allclose(h, [1.0])


@pytest.mark.parametrize("toy", [toy_t1, toy_t2], ids=["T1", "T2"])
def test_certify_toys_exact(toy):
    inst = toy()
    rep = certify(inst, solve_mip(build_single_level(inst)))
    assert rep.exact and rep.valid
    assert rep.margin == pytest.approx(0.0, abs=1e-9)
    assert set(rep.to_dict()) >= {"mip_value", "margin", "exact", "worst_h", "worst_yfix"}


def test_certify_widened_beta_never_negative():
    inst = toy_t1(beta_upper=5.0)
    rep = certify(inst, solve_mip(build_single_level(inst)))
    assert rep.margin >= -1e-9 and rep.valid


def test_infeasible_fixing_scores_inf():
    # y1 + mu >= h with y1 <= 0 forced: mu = 0 cannot cover h = 1
    inst = toy_t2()
    tl = inst.third
    a = np.vstack([tl.a_free.toarray(), [[-1.0, 0.0]]])
    tl = replace(tl, a_free=sp.csr_matrix(a),
                 b_free=np.append(tl.b_free, 0.0),
                 free_senses=None if tl.free_senses is None else np.append(tl.free_senses, ">"))
    v, _, y = adversarial_value(replace(inst, third=tl), [])
    assert v == pytest.approx(0.6)
    np.testing.assert_allclose(y, [1.0])


@pytest.mark.parametrize("seed", range(100))
def test_vertex_attainment(seed):
    inst = random_instance(seed)
    rng = np.random.default_rng(seed)
    tl, om = inst.third, inst.omega
    x = solve_lp(inst.first.feasible_set.as_lp()).primal
    yf = rng.integers(0, 2, tl.n_bin).astype(float) if tl.n_bin else None
    verts = np.asarray(enumerate_vertices(om))
    template = build_third_level_primal(inst, x, verts[0], yf)
    coupled = slice(template.n_rows - tl.n_coupled, template.n_rows)
    base = template.rhs[coupled] - tl.b_h @ verts[0]
    basis = None

    def value(h):
        nonlocal basis
        rhs = template.rhs.copy()
        rhs[coupled] = base + tl.b_h @ h
        sol = solve_lp(replace(template, rhs=rhs), warm_start=basis)
        basis = sol.basis or basis
        return sol.objective

    vmax = max(value(v) for v in verts)
    # random convex combinations of vertices are points of Omega
    for w in rng.dirichlet(np.ones(len(verts)), 500):
        h = w @ verts
        assert om.contains(h, tol=1e-7)
        val = value(h)
        assert val <= vmax + 1e-7 * (1 + abs(vmax)) or not np.isfinite(vmax)


@pytest.mark.parametrize("seed", range(20))
def test_pinned_instances_certify_exact(seed):
    inst = random_instance(seed, pinned=True)
    rep = certify(inst, solve_mip(build_single_level(inst)))
    assert rep.exact


def test_random_instance_deterministic():
    a, b = random_instance(3), random_instance(3)
    np.testing.assert_array_equal(a.third.c, b.third.c)
    np.testing.assert_array_equal(a.omega.b_omega, b.omega.b_omega)
