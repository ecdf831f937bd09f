"""From a trilevel instance to a single-level LP/MIP.

Pipeline: the third-level LP is dualized (variables alpha, beta), the bilinear
products ``h_i beta_j`` are replaced by ``kappa_ij`` under a McCormick envelope,
the resulting second-level maximization is dualized again, and the first level
is merged in. Dual sign conventions live in :func:`dualize_lp` only; the signs of
the final model are checked afterwards by :func:`check_structure`.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from ._validation import SENSE_EQ, SENSE_GE, SENSE_LE, check_vector
from .exceptions import DimensionMismatch, MissingBetaBounds
from .lpmodel import LpModel, MipModel
from .model import WcaroInstance, piecewise_linearize_objective, shift_h_lower_bound

__all__ = ["LpModel", "MipModel", "DualMap", "dualize_lp", "build_third_level_primal",
           "build_mccormick_relaxation", "build_single_level", "check_structure",
           "rows_to_bounds", "SingleLevelLayout"]

_FLIP = {SENSE_GE: SENSE_LE, SENSE_LE: SENSE_GE, SENSE_EQ: SENSE_EQ}


@dataclass(frozen=True, eq=False)
class DualMap:
    """Correspondence between a primal model and its dual.

    ``row_to_col[i]`` is the dual column of primal row ``i``; ``col_to_row[j]`` is
    the dual row of primal column ``j``. Finite nonzero column bounds become
    explicit primal rows; ``bound_cols`` lists them as ``(column, kind, dual column)``.
    """
    row_to_col: np.ndarray
    col_to_row: np.ndarray
    bound_cols: tuple = ()

    def dual_of_row(self, i):
        return int(self.row_to_col[i])

    def dual_row_of_col(self, j):
        return int(self.col_to_row[j])


def _column_sign(lo, up):
    """Sign class of a column plus the bound rows it needs: ('+'|'-'|'free', [(kind, value)])."""
    extra = []
    if lo == 0.0:
        if np.isfinite(up):
            extra.append(("upper", up))
        return "+", extra
    if up == 0.0 and not np.isfinite(lo):
        return "-", extra
    if np.isfinite(lo) and lo == up:
        return "free", [("fixed", lo)]
    if np.isfinite(lo):
        extra.append(("lower", lo))
    if np.isfinite(up):
        extra.append(("upper", up))
    return "free", extra


def dualize_lp(m: LpModel):
    """LP dual of ``m`` with the textbook sign rules.

    For a minimization, a ``>=`` row gets a nonnegative multiplier, ``<=`` a
    nonpositive one and ``=`` a free one; a nonnegative column gives a ``<=``
    dual row, a nonpositive column ``>=`` and a free column ``=``. A maximization
    uses the mirrored rules. Objective/rhs parameters swap roles.
    """
    n, mrows = m.n_vars, m.n_rows
    minimize = m.sense == "min"
    signs = []
    b_rows, b_cols, b_vals, b_senses, b_rhs, bound_info = [], [], [], [], [], []
    for j in range(n):
        sgn, extra = _column_sign(m.lower[j], m.upper[j])
        signs.append(sgn)
        for kind, val in extra:
            b_rows.append(len(b_rhs))
            b_cols.append(j)
            b_vals.append(1.0)
            b_senses.append({"lower": SENSE_GE, "upper": SENSE_LE, "fixed": SENSE_EQ}[kind])
            b_rhs.append(val)
            bound_info.append((j, kind))
    nb = len(b_rhs)
    a_bound = sp.csr_matrix((b_vals, (b_rows, b_cols)), shape=(nb, n))
    a_full = sp.vstack([m.a_mat, a_bound], format="csr")
    senses = np.concatenate([m.senses, np.asarray(b_senses, dtype="<U1")]).astype("<U1")
    rhs = np.concatenate([m.rhs, np.asarray(b_rhs, dtype=float)])

    # multiplier sign per primal row
    nonneg = SENSE_GE if minimize else SENSE_LE
    lower = np.where(senses == nonneg, 0.0, -np.inf)
    upper = np.where((senses == nonneg) | (senses == SENSE_EQ), np.inf, 0.0)
    lower[senses == SENSE_EQ] = -np.inf

    # dual row relation per primal column
    plus_rel = SENSE_LE if minimize else SENSE_GE
    rel = {"+": plus_rel, "-": _FLIP[plus_rel], "free": SENSE_EQ}
    d_senses = np.asarray([rel[s] for s in signs], dtype="<U1")

    row_names = m.row_names or tuple(f"r{i}" for i in range(mrows))
    var_names = m.var_names or tuple(f"v{j}" for j in range(n))
    bound_names = tuple(f"{kind}[{var_names[j]}]" for j, kind in bound_info)

    obj_param = rhs_param = None
    if m.has_params:
        p = len(m.param_names)
        if m.rhs_param is not None:
            obj_param = sp.vstack([m.rhs_param, sp.csr_matrix((nb, p))], format="csr")
        if m.obj_param is not None:
            rhs_param = sp.csr_matrix(m.obj_param)
    dual = LpModel(rhs, sp.csr_matrix(a_full.T), d_senses, m.obj.copy(), lower, upper,
                   "max" if minimize else "min", m.obj_const, row_names + bound_names,
                   var_names, obj_param, rhs_param, m.param_names)
    dmap = DualMap(np.arange(mrows), np.arange(n),
                   tuple((j, kind, mrows + k) for k, (j, kind) in enumerate(bound_info)))
    return dual, dmap


def _x_vector(inst, x):
    x = check_vector(x, name="x")
    nxo = inst.third.b_x.shape[1]
    # a linearized first level appends epigraph columns after the original x
    if x.shape[0] not in (nxo, inst.first.n_x):
        raise DimensionMismatch(f"x has length {x.shape[0]}, expected {nxo}")
    return x[:nxo]


def _fixing_rows(tl, y_fix):
    """Rows ``y_k >= v`` and ``-y_k >= -v`` for every binary ``k``."""
    v = check_vector(y_fix, tl.n_bin, "y_fix")
    if np.any((v != 0) & (v != 1)):
        raise ValueError("y_fix entries must be 0 or 1")
    nb = tl.n_bin
    cols = tl.binary_index
    rows = np.arange(2 * nb)
    a = sp.csr_matrix((np.concatenate([np.ones(nb), -np.ones(nb)]),
                       (rows, np.concatenate([cols, cols]))), shape=(2 * nb, tl.n_y))
    names = tuple(f"fix_lo[{k}]" for k in range(nb)) + tuple(f"fix_hi[{k}]" for k in range(nb))
    return a, np.concatenate([v, -v]), names


def build_third_level_primal(inst: WcaroInstance, x, h, y_fix=None) -> LpModel:
    """Third-level LP at fixed ``(x, h)``: ``min c y`` over free ``y``.

    With ``y_fix`` the binaries are pinned by pairs of inequality rows. Without
    it they are left unrestricted, which is the LP underlying the relaxed
    second level.
    """
    tl = inst.third
    x = _x_vector(inst, x)
    h = check_vector(h, inst.n_h, "h")
    blocks = [tl.a_free]
    senses = [tl.senses]
    rhs = [tl.b_free]
    names = [tuple(f"free[{i}]" for i in range(tl.n_free_rows))]
    if y_fix is not None:
        a_f, b_f, n_f = _fixing_rows(tl, y_fix)
        blocks.append(a_f)
        senses.append(np.full(b_f.size, SENSE_GE, dtype="<U1"))
        rhs.append(b_f)
        names.append(n_f)
    blocks.append(tl.b_coupled)
    senses.append(np.full(tl.n_coupled, SENSE_GE, dtype="<U1"))
    rhs.append(tl.b_x @ x + tl.b_h @ h + tl.b0)
    names.append(tuple(f"coupled[{j}]" for j in range(tl.n_coupled)))
    ny = tl.n_y
    return LpModel(tl.c.astype(float), sp.vstack(blocks, format="csr"),
                   np.concatenate(senses).astype("<U1"), np.concatenate(rhs),
                   np.full(ny, -np.inf), np.full(ny, np.inf), "min", 0.0,
                   tuple(f"y[{k}]" for k in range(ny)), sum(names, ()))


def _check_beta(tl, rows_bh):
    if not tl.has_beta_bounds:
        raise MissingBetaBounds("beta bounds are required for the McCormick envelope")
    if np.any(tl.beta_lower < 0) or np.any(tl.beta_lower > tl.beta_upper):
        raise MissingBetaBounds("beta bounds must satisfy 0 <= lower <= upper")
    if rows_bh.size and not np.all(np.isfinite(tl.beta_upper[rows_bh])):
        raise MissingBetaBounds("finite beta upper bounds are needed on rows with B_h entries")


def build_mccormick_relaxation(inst: WcaroInstance, x=None, y_fix=None) -> LpModel:
    """Relaxed second level as an LP maximization.

    Columns are ``alpha, beta, gamma, delta, h, eta, kappa, rho1..rho4``. Each row
    is named after the dual variable it will produce (``y[k]``, ``u_bplus[j]``,
    ``u_bminus[j]``, ``u_omega[r]``, ``u_env1[i,j]`` ...). Without ``x`` the term
    ``(B_x x)^T beta`` stays a parametric objective over ``x[k]``.
    """
    tl, om = inst.third, inst.omega
    if np.any(om.h_lower != 0):
        raise ValueError("h_lower must be zero; apply shift_h_lower_bound first")
    bh = sp.coo_matrix(tl.b_h)
    order = np.lexsort((bh.col, bh.row))
    rj, ci, bv = bh.row[order], bh.col[order], bh.data[order]
    _check_beta(tl, np.unique(rj))
    nnz = rj.size
    nj, nI, ny = tl.n_coupled, om.dim, tl.n_y
    bl, bu = tl.beta_lower, tl.beta_upper
    hl, hu = om.h_lower, om.h_upper

    # alpha blocks: free rows, then fixing rows
    a_alpha, alpha_rhs = tl.a_free, tl.b_free
    alpha_senses = tl.senses
    if y_fix is not None:
        a_f, b_f, _ = _fixing_rows(tl, y_fix)
        a_alpha = sp.vstack([a_alpha, a_f], format="csr")
        alpha_rhs = np.concatenate([alpha_rhs, b_f])
        alpha_senses = np.concatenate([alpha_senses, np.full(b_f.size, SENSE_GE)]).astype("<U1")
    na = alpha_rhs.size
    fin = np.flatnonzero(np.isfinite(bu))
    nslack = om.n_slack

    # column offsets
    c_alpha = 0
    c_beta = c_alpha + na
    c_gamma = c_beta + nj
    c_delta = c_gamma + fin.size
    c_h = c_delta + nj
    c_eta = c_h + nI
    c_kappa = c_eta + nslack
    c_rho = c_kappa + nnz
    ncol = c_rho + 4 * nnz

    blocks = []
    rhs = []
    names = []
    # y rows: A'^T alpha + B^T beta = c
    blocks.append(sp.hstack([a_alpha.T, tl.b_coupled.T,
                             sp.csr_matrix((ny, ncol - c_gamma))], format="csr"))
    rhs.append(tl.c)
    names += [f"y[{k}]" for k in range(ny)]
    # beta + gamma = beta_upper (finite rows only)
    k = fin.size
    blocks.append(sp.csr_matrix((np.ones(2 * k), (np.tile(np.arange(k), 2),
                                                  np.concatenate([c_beta + fin, c_gamma + np.arange(k)]))),
                                shape=(k, ncol)))
    rhs.append(bu[fin])
    names += [f"u_bplus[{j}]" for j in fin]
    # beta - delta = beta_lower
    blocks.append(sp.csr_matrix((np.concatenate([np.ones(nj), -np.ones(nj)]),
                                 (np.tile(np.arange(nj), 2),
                                  np.concatenate([c_beta + np.arange(nj), c_delta + np.arange(nj)]))),
                                shape=(nj, ncol)))
    rhs.append(bl)
    names += [f"u_bminus[{j}]" for j in range(nj)]
    # Omega: a_omega h + eta = b_omega
    blocks.append(sp.hstack([sp.csr_matrix((om.n_rows, c_h)), om.a_omega, om.slack_matrix(),
                             sp.csr_matrix((om.n_rows, ncol - c_kappa))], format="csr"))
    rhs.append(om.b_omega)
    names += [f"u_omega[{r}]" for r in range(om.n_rows)]
    # envelope rows
    e = np.arange(nnz)
    kap = c_kappa + e
    beta_c = c_beta + rj
    h_c = c_h + ci
    # (beta coef, h coef, rho sign, rhs)
    env = [(-hl[ci], -bl[rj], -1.0, -hl[ci] * bl[rj]),
           (-hu[ci], -bu[rj], -1.0, -hu[ci] * bu[rj]),
           (-hu[ci], -bl[rj], 1.0, -hu[ci] * bl[rj]),
           (-hl[ci], -bu[rj], 1.0, -hl[ci] * bu[rj])]
    for t, (cb, chh, rs, rr) in enumerate(env):
        rows = np.concatenate([e, e, e, e])
        cols = np.concatenate([kap, beta_c, h_c, c_rho + t * nnz + e])
        vals = np.concatenate([np.ones(nnz), cb, chh, np.full(nnz, rs)])
        blk = sp.csr_matrix((vals, (rows, cols)), shape=(nnz, ncol))
        blk.sum_duplicates()
        blocks.append(blk)
        rhs.append(rr)
        names += [f"u_env{t + 1}[{i},{j}]" for i, j in zip(ci, rj)]

    obj = np.zeros(ncol)
    obj[c_alpha:c_beta] = alpha_rhs
    obj[c_beta:c_gamma] = tl.b0
    obj[c_kappa:c_rho] = bv
    obj_param = None
    param_names = ()
    if x is None:
        nxo = tl.b_x.shape[1]
        obj_param = sp.vstack([sp.csr_matrix((c_beta, nxo)), tl.b_x,
                               sp.csr_matrix((ncol - c_gamma, nxo))], format="csr")
        param_names = tuple(f"x[{k}]" for k in range(nxo))
    else:
        obj[c_beta:c_gamma] += tl.b_x @ _x_vector(inst, x)

    lower = np.zeros(ncol)
    upper = np.full(ncol, np.inf)
    lower[c_alpha:c_beta] = np.where(alpha_senses == SENSE_GE, 0.0, -np.inf)
    upper[c_alpha:c_beta] = np.where(alpha_senses == SENSE_LE, 0.0, np.inf)
    var_names = ([f"alpha[{i}]" for i in range(na)] + [f"beta[{j}]" for j in range(nj)]
                 + [f"gamma[{j}]" for j in fin] + [f"delta[{j}]" for j in range(nj)]
                 + [f"h[{i}]" for i in range(nI)]
                 + [f"eta[{r}]" for r in np.flatnonzero(om.slack_rows)]
                 + [f"kappa[{i},{j}]" for i, j in zip(ci, rj)]
                 + [f"rho{t}[{i},{j}]" for t in range(1, 5) for i, j in zip(ci, rj)])
    a_mat = sp.vstack(blocks, format="csr")
    m = a_mat.shape[0]
    rhs_param = sp.csr_matrix((m, len(param_names))) if param_names else None
    return LpModel(obj, a_mat, np.full(m, SENSE_EQ, dtype="<U1"), np.concatenate(rhs),
                   lower, upper, "max", 0.0, tuple(var_names), tuple(names),
                   obj_param, rhs_param, param_names)


def rows_to_bounds(m: LpModel) -> LpModel:
    """Move rows with a single nonzero (and no parameter dependence) into column bounds."""
    a = sp.csr_matrix(m.a_mat)
    counts = np.diff(a.indptr)
    param_free = np.ones(m.n_rows, dtype=bool)
    if m.rhs_param is not None:
        param_free = np.diff(sp.csr_matrix(m.rhs_param).indptr) == 0
    lower = m.lower.copy()
    upper = m.upper.copy()
    keep = np.ones(m.n_rows, dtype=bool)
    for i in np.flatnonzero((counts == 1) & param_free):
        j = a.indices[a.indptr[i]]
        coef = a.data[a.indptr[i]]
        val = m.rhs[i] / coef
        s = m.senses[i]
        if s != SENSE_EQ and coef < 0:
            s = _FLIP[s]
        lo, up = lower[j], upper[j]
        if s in (SENSE_GE, SENSE_EQ):
            lo = max(lo, val)
        if s in (SENSE_LE, SENSE_EQ):
            up = min(up, val)
        if lo > up:
            continue
        lower[j], upper[j] = lo, up
        keep[i] = False
    idx = np.flatnonzero(keep)
    return replace(m, a_mat=a[idx], senses=m.senses[idx], rhs=m.rhs[idx], lower=lower,
                   upper=upper,
                   row_names=tuple(m.row_names[i] for i in idx) if m.row_names else (),
                   rhs_param=None if m.rhs_param is None else sp.csr_matrix(m.rhs_param)[idx])


@dataclass(frozen=True)
class SingleLevelLayout:
    """Column positions inside a single-level model."""
    n_x: int
    n_aux: int
    y_start: int
    n_cont: int
    n_bin: int

    @property
    def x_slice(self):
        return slice(0, self.n_x)

    @property
    def y_slice(self):
        return slice(self.y_start, self.y_start + self.n_cont + self.n_bin)

    @property
    def binary_cols(self):
        return np.arange(self.y_start + self.n_cont, self.y_start + self.n_cont + self.n_bin)


def build_single_level(inst: WcaroInstance, y_fix=None, segments=16, return_layout=False):
    """Single-level LP (binaries fixed through ``y_fix``) or MIP (binaries free).

    Columns are ordered ``x``, PWL epigraph variables ``t``, then the dual columns
    ``y, u_bplus, u_bminus, u_omega, u_env1..u_env4``. ``h_lower`` is shifted to zero
    first when necessary; the optimal value is unaffected.
    """
    inst, _ = shift_h_lower_bound(inst)
    tl = inst.third
    fl = piecewise_linearize_objective(inst.first, segments)
    nxo = tl.b_x.shape[1]
    if nxo != fl.n_original:
        raise DimensionMismatch(f"B_x has {nxo} columns, first level has {fl.n_original}")
    relax = build_mccormick_relaxation(inst, None, y_fix)
    dual, _ = dualize_lp(relax)
    dual = rows_to_bounds(dual)
    nx = fl.n_x
    nd = dual.n_vars
    # move -B_x x to the left-hand side of the parametric rows
    p_mat = dual.rhs_param if dual.rhs_param is not None else sp.csr_matrix((dual.n_rows, nxo))
    p_mat = sp.hstack([p_mat, sp.csr_matrix((dual.n_rows, nx - nxo))], format="csr")
    ps = fl.feasible_set
    a_top = sp.hstack([ps.a_mat, sp.csr_matrix((ps.a_mat.shape[0], nd))], format="csr")
    a_bot = sp.hstack([-p_mat, dual.a_mat], format="csr")
    x_names = [f"x[{k}]" for k in range(nxo)] + [f"t[{k}]" for k in range(fl.n_aux)]
    lower = np.concatenate([ps.lower, dual.lower])
    upper = np.concatenate([ps.upper, dual.upper])
    bin_cols = np.zeros(0, dtype=int)
    if y_fix is None and tl.n_bin:
        bin_cols = nx + tl.binary_index
        lower[bin_cols] = np.maximum(lower[bin_cols], 0.0)
        upper[bin_cols] = np.minimum(upper[bin_cols], 1.0)
    model = LpModel(np.concatenate([fl.obj_linear, dual.obj]),
                    sp.vstack([a_top, a_bot], format="csr"),
                    np.concatenate([ps.senses, dual.senses]).astype("<U1"),
                    np.concatenate([ps.rhs, dual.rhs]), lower, upper, "min",
                    fl.obj_constant + dual.obj_const,
                    tuple(x_names) + dual.var_names,
                    tuple(f"first[{i}]" for i in range(ps.rhs.size)) + dual.row_names)
    mip = MipModel(model, bin_cols)
    if return_layout:
        return mip, SingleLevelLayout(nxo, fl.n_aux, nx, tl.n_cont, tl.n_bin)
    return mip


def _cols_with(model, prefix):
    return np.asarray([j for j, nm in enumerate(model.var_names) if nm.startswith(prefix)],
                      dtype=int)


def _sign_ok(model, cols, want, tol=0.0):
    """Columns restricted to ``want`` ('>=0' or '<=0') by a bound or a singleton row."""
    a = sp.csc_matrix(model.a_mat)
    bad = []
    for j in cols:
        if want == ">=0" and model.lower[j] >= -tol:
            continue
        if want == "<=0" and model.upper[j] <= tol:
            continue
        ok = False
        for p in range(a.indptr[j], a.indptr[j + 1]):
            i = a.indices[p]
            row = sp.csr_matrix(model.a_mat)[i]
            if row.nnz != 1 or model.rhs[i] != 0:
                continue
            s = model.senses[i] if a.data[p] > 0 else _FLIP[model.senses[i]]
            if (want == ">=0" and s == SENSE_GE) or (want == "<=0" and s == SENSE_LE):
                ok = True
        if not ok:
            bad.append(model.var_names[j])
    return bad


def check_structure(model: LpModel, b_h=None):
    """Failures of the expected dual sign pattern (empty list when all hold)."""
    fails = []
    for prefix, want in (("u_bplus", ">=0"), ("u_bminus", "<=0"), ("u_env1", "<=0"),
                         ("u_env2", "<=0"), ("u_env3", ">=0"), ("u_env4", ">=0")):
        fails += [f"{nm} not {want}" for nm in _sign_ok(model, _cols_with(model, prefix), want)]
    names = {nm: j for j, nm in enumerate(model.var_names)}
    rows = {nm: i for i, nm in enumerate(model.row_names)}
    a = sp.csr_matrix(model.a_mat)
    bh = None if b_h is None else sp.csr_matrix(b_h)
    for nm in model.var_names:
        if not nm.startswith("u_env1["):
            continue
        key = nm[len("u_env1"):]
        row_name = f"kappa{key}"
        if row_name not in rows:
            fails.append(f"envelope-sum row {row_name} missing")
            continue
        i = rows[row_name]
        row = a[i].toarray().ravel()
        cols = [names[f"u_env{t}{key}"] for t in range(1, 5)]
        if model.senses[i] != SENSE_GE or np.any(row[cols] != 1.0) or \
                np.count_nonzero(row) != 4:
            fails.append(f"envelope-sum row {row_name} malformed")
        if bh is not None:
            hi, rj = (int(v) for v in key.strip("[]").split(","))
            if model.rhs[i] != bh[rj, hi]:
                fails.append(f"envelope-sum row {row_name} rhs differs from B_h")
    return fails
