"""Brute-force ground truth for small instances.

For a fixed binary assignment ``y'`` the third-level value is convex in ``h``
(it is an LP value as a function of the right-hand side), so its maximum over
the polytope Omega is attained at a vertex. The adversarial value is therefore

    min_{y' in {0,1}^n_bin}  max_{v in vert(Omega)}  LP3(x, v, y')

which the helpers below compute by enumeration.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .exceptions import TooLarge
from .model import (FirstLevel, OmegaStandard, Polytope, ThirdLevel, WcaroInstance,
                    standardize_omega)
from .reformulate import build_third_level_primal
from .simplex import LpParams, solve_lp

logger = logging.getLogger(__name__)

VERTEX_CAP = 6
BINARY_CAP = 10
DEDUP_TOL = 1e-9


@dataclass
class CertReport:
    mip_value: float
    oracle_value_at_xstar: float
    adversarial_value: float
    first_level_cost: float
    margin: float
    exact: bool
    valid: bool
    worst_h: np.ndarray = field(default_factory=lambda: np.zeros(0))
    worst_yfix: np.ndarray = field(default_factory=lambda: np.zeros(0))
    x_star: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tol: float = 1e-6

    def to_dict(self):
        d = asdict(self)
        for k in ("worst_h", "worst_yfix", "x_star"):
            d[k] = np.asarray(d[k], dtype=float).tolist()
        return d


def enumerate_vertices(om: OmegaStandard, cap=VERTEX_CAP, tol=DEDUP_TOL):
    """Vertices of Omega in ``h`` space, sorted lexicographically.

    Every choice of active inequalities that, together with the equality rows,
    pins down a unique point is solved and kept when feasible.
    """
    d = om.dim
    if d > cap:
        raise TooLarge(f"|I|={d} exceeds the vertex cap {cap}")
    if d == 0:
        return [np.zeros(0)]
    a = om.a_omega.toarray()
    eq = ~om.slack_rows
    a_eq, b_eq = a[eq], om.b_omega[eq]
    eye = np.eye(d)
    a_in = np.vstack([a[~eq], -eye, eye])
    b_in = np.concatenate([om.b_omega[~eq], -om.h_lower, om.h_upper])
    finite = np.isfinite(b_in)
    a_in, b_in = a_in[finite], b_in[finite]
    rank_eq = np.linalg.matrix_rank(a_eq) if a_eq.size else 0
    k = d - rank_eq
    verts = []
    for combo in itertools.combinations(range(a_in.shape[0]), k):
        mat = np.vstack([a_eq, a_in[list(combo)]])
        rhs = np.concatenate([b_eq, b_in[list(combo)]])
        if np.linalg.matrix_rank(mat) < d:
            continue
        v, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
        if np.max(np.abs(mat @ v - rhs), initial=0.0) > 1e-9 * (1 + np.abs(rhs).max(initial=0)):
            continue
        if not om.contains(v, tol=1e-9):
            continue
        v = np.where(np.abs(v) < tol, 0.0, v)
        if not any(np.max(np.abs(v - w)) <= tol for w in verts):
            verts.append(v)
    verts.sort(key=tuple)
    return verts


def binary_assignments(n_bin, cap=BINARY_CAP):
    if n_bin > cap:
        raise TooLarge(f"n_bin={n_bin} exceeds the enumeration cap {cap}")
    return [np.asarray(v, dtype=float) for v in itertools.product((0, 1), repeat=n_bin)]


def adversarial_value(inst: WcaroInstance, x, vertex_cap=VERTEX_CAP, binary_cap=BINARY_CAP,
                      params=None, vertices=None):
    """``min_{y'} max_{vertex h} LP3(x, h, y')`` with witnesses.

    Infeasible fixings score ``+inf``. Ties in the inner maximum go to the
    lexicographically largest vertex, ties in the outer minimum to the first
    assignment in binary counting order.
    """
    params = params or LpParams()
    verts = vertices if vertices is not None else enumerate_vertices(inst.omega, vertex_cap)
    tl = inst.third
    assigns = binary_assignments(tl.n_bin, binary_cap)
    # one template LP; only the fixing and coupled right-hand sides change below
    template = build_third_level_primal(inst, x, verts[0], assigns[0] if tl.n_bin else None)
    base_rhs = template.rhs.copy()
    nf, nb, nj = tl.n_free_rows, tl.n_bin, tl.n_coupled
    coupled = slice(template.n_rows - nj, template.n_rows)
    rhs_x = base_rhs[coupled] - tl.b_h @ verts[0]
    best = (np.inf, verts[-1], assigns[0])
    basis = None
    for yfix in assigns:
        worst_val, worst_h = -np.inf, verts[0]
        rhs = base_rhs.copy()
        rhs[nf:nf + nb] = yfix
        rhs[nf + nb:nf + 2 * nb] = -yfix
        for v in verts:
            rhs[coupled] = rhs_x + tl.b_h @ v
            # consecutive LPs differ only in the right-hand side: reuse the last basis
            sol = solve_lp(replace(template, rhs=rhs.copy()), params, warm_start=basis)
            if sol.basis is not None:
                basis = sol.basis
            val = sol.objective  # +inf when infeasible, -inf when unbounded
            if val >= worst_val - 1e-9 * (1 + abs(val) if np.isfinite(val) else 1):
                worst_val, worst_h = max(val, worst_val), v
            if worst_val == np.inf:
                break
        if worst_val < best[0] - 1e-9 * (1 + abs(worst_val)):
            best = (worst_val, worst_h, yfix)
    return best


def certify(inst: WcaroInstance, sol, tol=1e-6, **kw) -> CertReport:
    """Compare a single-level optimum with the brute-force value at its ``x``.

    ``margin = sol.objective - G(x*) - adversarial(x*)`` with the exact quadratic
    ``G``. It is nonnegative for a correct upper bound; ``valid`` records that.
    """
    n = inst.third.b_x.shape[1]
    x_star = np.asarray(sol.primal[:n], dtype=float)
    adv, worst_h, worst_y = adversarial_value(inst, x_star, **kw)
    g = inst.first.value(x_star)
    margin = float(sol.objective - g - adv)
    report = CertReport(float(sol.objective), float(g + adv), float(adv), float(g), margin,
                        abs(margin) <= tol, margin >= -tol, np.asarray(worst_h),
                        np.asarray(worst_y), x_star, tol)
    if not report.valid:
        logger.warning("upper-bound margin %.3g below -%g", margin, tol)
    return report


# -- canonical toys -----------------------------------------------------------------

def toy_t1(beta_upper=1.0):
    """``min_x x + max_{h in [0,1]} min{y : y >= 0, y >= h - x}`` on ``x in [0, 2]``."""
    fl = FirstLevel.build(Polytope.build(dim=1, lower=[0.0], upper=[2.0]), obj_linear=[1.0])
    om = standardize_omega(Polytope.build(dim=1, lower=[0.0], upper=[1.0]))
    tl = ThirdLevel.build(1, 0, [1.0], [[1.0]], [0.0], [[1.0]], [[-1.0]], [[1.0]], [0.0],
                          beta_lower=[0.0], beta_upper=[beta_upper])
    return WcaroInstance(fl, om, tl, "T1")


def toy_t2():
    """``max_{h in [0,1]} min{y1 + 0.6 mu : y1 >= 0, y1 + mu >= h, mu binary}``."""
    fl = FirstLevel.build(Polytope.build(dim=0))
    om = standardize_omega(Polytope.build(dim=1, lower=[0.0], upper=[1.0]))
    tl = ThirdLevel.build(1, 1, [1.0, 0.6], [[1.0, 0.0]], [0.0], [[1.0, 1.0]],
                          sp.csr_matrix((1, 0)), [[1.0]], [0.0],
                          beta_lower=[0.0], beta_upper=[1.0])
    return WcaroInstance(fl, om, tl, "T2")


# -- random oracle-tractable instances -------------------------------------------------

def random_instance(seed, max_bin=6, max_h=3, pinned=False, linear_g=True):
    """Random weakly connected instance with valid beta bounds.

    Every coupled row ``j`` carries its own elastic variable ``s_j`` with cost
    ``p_j > 0``. With ``s_j >= 0`` every dual solution has ``0 <= beta_j <= p_j``,
    so ``[0, p_j]`` are valid bounds. With ``pinned=True`` the elastic variable is
    free, which forces ``beta_j = p_j``; the bounds then coincide and the
    McCormick envelope is exact.
    """
    rng = np.random.default_rng(seed)
    n_x = int(rng.integers(1, 3))
    n_h = int(rng.integers(1, max_h + 1))
    n_bin = int(rng.integers(0, max_bin + 1))
    n_plain = int(rng.integers(1, 4))
    n_j = int(rng.integers(1, 4))
    n_cont = n_plain + n_j
    n_y = n_cont + n_bin
    bins = np.arange(n_cont, n_y)

    # first level: box plus one budget row
    x_hi = rng.uniform(1.0, 3.0, n_x)
    a_x = rng.uniform(0.0, 1.0, (1, n_x))
    fs = Polytope.build(a_x, ["<"], [float((a_x @ x_hi)[0]) * rng.uniform(0.5, 1.0)],
                        lower=np.zeros(n_x), upper=x_hi)
    quad = np.zeros(n_x) if linear_g else rng.uniform(0.0, 0.5, n_x)
    fl = FirstLevel.build(fs, rng.uniform(-0.5, 1.5, n_x), quad, rng.uniform(-1, 1))

    # uncertainty: shifted box cut by one or two random halfspaces
    h_lo = np.round(rng.uniform(0.0, 1.0, n_h), 3) * (rng.random(n_h) < 0.5)
    h_hi = h_lo + rng.uniform(0.5, 2.0, n_h)
    k = int(rng.integers(0, 3))
    a_h = rng.uniform(-1.0, 1.0, (k, n_h))
    center = (h_lo + h_hi) / 2
    b_h = a_h @ center + rng.uniform(0.05, 0.6, k)
    om = standardize_omega(Polytope.build(a_h if k else None, ["<"] * k, b_h,
                                          lower=h_lo, upper=h_hi, dim=n_h))

    # free rows: 0 <= y_k <= U_k for plain variables, s >= 0, binary gating
    rows, rhs = [], []
    u_plain = rng.uniform(1.0, 3.0, n_plain)
    for i in range(n_plain):
        rows.append({i: 1.0}); rhs.append(0.0)
        rows.append({i: -1.0}); rhs.append(-u_plain[i])
    if not pinned:
        for j in range(n_j):
            rows.append({n_plain + j: 1.0}); rhs.append(0.0)
    for b in bins:
        i = int(rng.integers(0, n_plain))
        if rng.random() < 0.5:
            # y_i <= U_i * (1 - 0.5 mu): switching the binary on caps y_i
            rows.append({i: -1.0, int(b): -0.5 * u_plain[i]}); rhs.append(-u_plain[i])
    a_free = np.zeros((len(rows), n_y))
    for r, row in enumerate(rows):
        for col, val in row.items():
            a_free[r, col] = val

    # coupled rows: B y + s_j >= B_x x + B_h h + b0
    p = rng.uniform(1.0, 3.0, n_j)
    b_cp = np.zeros((n_j, n_y))
    b_cp[:, :n_plain] = rng.uniform(0.0, 1.0, (n_j, n_plain)) * (rng.random((n_j, n_plain)) < 0.7)
    b_cp[:, bins] = rng.uniform(0.2, 1.5, (n_j, n_bin)) * (rng.random((n_j, n_bin)) < 0.7)
    b_cp[np.arange(n_j), n_plain + np.arange(n_j)] = 1.0
    b_x = rng.uniform(-1.0, 1.0, (n_j, n_x)) * (rng.random((n_j, n_x)) < 0.7)
    b_hm = rng.uniform(-1.5, 1.5, (n_j, n_h)) * (rng.random((n_j, n_h)) < 0.7)
    b_hm[int(rng.integers(0, n_j)), int(rng.integers(0, n_h))] = rng.choice([-1.0, 1.0])
    b0 = rng.uniform(-1.0, 1.0, n_j)

    c = np.concatenate([rng.uniform(-1.0, 1.0, n_plain), p, rng.uniform(0.0, 1.5, n_bin)])
    tl = ThirdLevel.build(n_cont, n_bin, c, a_free, rhs, b_cp, b_x, b_hm, b0,
                          beta_lower=p if pinned else np.zeros(n_j), beta_upper=p)
    name = f"random-{seed}{'-pinned' if pinned else ''}"
    return WcaroInstance(fl, om, tl, name)
