"""Bounded-variable revised simplex.

The native engine works on ``min c @ x`` over ``A x - s = 0`` with bounds on both
structural columns ``x`` and row logicals ``s`` (a ``>=`` row gives ``s >= rhs``,
and so on). A cold start runs an artificial-variable phase 1 followed by phase 2.
A warm start from a previous basis runs the dual simplex, which is the natural
fit after branch-and-bound tightens the bounds of a basic column.

``engine="highs"`` delegates to :func:`scipy.optimize.linprog` and maps the
result onto the same :class:`LpSolution` contract.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import SENSE_EQ, SENSE_GE, SENSE_LE
from .exceptions import NumericalFailure
from .lpmodel import LpModel

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3


@dataclass(frozen=True)
class LpParams:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    pivot_tol: float = 1e-9
    bland_after: int = 1000
    refactor_every: int = 100
    max_iter: int | None = None
    max_retries: int = 3
    engine: str = "native"
    log_every: int = 0


@dataclass(eq=False)
class LpSolution:
    status: str
    objective: float
    primal: np.ndarray
    dual_rows: np.ndarray
    reduced_costs: np.ndarray
    iterations: int = 0
    basis: "Basis | None" = field(default=None, repr=False)

    @property
    def is_optimal(self):
        return self.status == OPTIMAL


@dataclass(frozen=True, eq=False)
class Basis:
    """Basic column indices plus the bound status of every column (native engine)."""
    head: np.ndarray
    status: np.ndarray


def solve_lp(model: LpModel, params: LpParams | None = None, warm_start: Basis | None = None):
    """Solve ``model`` and return an :class:`LpSolution`.

    Duals follow the sensitivity convention ``dual_rows[i] = d objective / d rhs[i]``,
    so a ``>=`` row of a minimization has a nonnegative dual.
    """
    params = params or LpParams()
    if model.has_params:
        raise ValueError("bind model parameters before solving")
    if params.engine == "highs":
        return _solve_highs(model, params)
    if params.engine != "native":
        raise ValueError(f"unknown engine {params.engine!r}")
    flip = -1.0 if model.sense == "max" else 1.0
    engine = _NativeSimplex(model, params)
    sol = engine.solve(warm_start)
    if flip < 0:
        sol.objective = -sol.objective
        sol.dual_rows = -sol.dual_rows
        sol.reduced_costs = -sol.reduced_costs
    sol.objective += 0.0  # no negative zero
    return sol


class _LostFeasibility(Exception):
    pass


class _Factor:
    """LU factorization of a basis matrix with a product-form eta file."""

    dense_cutoff = 300

    def __init__(self, bmat, pivot_tol):
        m = bmat.shape[0]
        self.m = m
        self.etas = []
        if m == 0:
            self._solve = lambda v, trans=False: v.copy()
            return
        if m <= self.dense_cutoff:
            dense = bmat if isinstance(bmat, np.ndarray) else bmat.toarray()
            with warnings.catch_warnings():
                warnings.simplefilter("error", sla.LinAlgWarning)
                try:
                    lu, piv = sla.lu_factor(dense, check_finite=False)
                except (sla.LinAlgWarning, ValueError) as exc:
                    raise NumericalFailure(f"singular basis: {exc}") from None
            diag = np.abs(np.diag(lu))
            if diag.min() <= 1e-11 * max(1.0, diag.max()):
                raise NumericalFailure("singular basis")
            self._solve = lambda v, trans=False: sla.lu_solve((lu, piv), v, trans=1 if trans else 0,
                                                              check_finite=False)
        else:
            try:
                lu = spla.splu(sp.csc_matrix(bmat), permc_spec="COLAMD")
            except RuntimeError as exc:
                raise NumericalFailure(f"singular basis: {exc}") from None
            diag = np.abs(lu.U.diagonal())
            if diag.min() <= 1e-11 * max(1.0, diag.max()):
                raise NumericalFailure("singular basis")
            self._solve = lambda v, trans=False: lu.solve(v, trans="T" if trans else "N")

    @property
    def n_updates(self):
        return len(self.etas)

    def ftran(self, v):
        w = self._solve(np.asarray(v, dtype=float))
        for r, idx, vals, piv in self.etas:
            wr = w[r]
            if wr != 0.0:
                w[idx] += vals * wr
                w[r] = piv * wr
        return w

    def btran(self, v):
        z = np.array(v, dtype=float)
        for r, idx, vals, piv in reversed(self.etas):
            z[r] = piv * z[r] + vals @ z[idx]
        return self._solve(z, trans=True)

    def update(self, r, alpha):
        ar = alpha[r]
        idx = np.flatnonzero(alpha)
        idx = idx[idx != r]
        self.etas.append((r, idx, -alpha[idx] / ar, 1.0 / ar))


class _NativeSimplex:
    dense_limit = 200_000  # entries of [A | -I] below which dense kernels are faster

    def __init__(self, model: LpModel, params: LpParams):
        self.p = params
        mdl = model.as_min()
        self.model = mdl
        self.m, self.n = mdl.a_mat.shape
        m, n = self.m, self.n
        self.dense = m * (n + m) <= self.dense_limit
        if self.dense:
            self.a_dense = mdl.a_mat.toarray()
            self.kd = np.hstack([self.a_dense, -np.eye(m)])
            self.kmat = None
        else:
            a = sp.csc_matrix(mdl.a_mat, dtype=float)
            self.a_csc = a
            self.at_csr = sp.csr_matrix(a.T)
            self.kmat = sp.hstack([a, -sp.identity(m, format="csc")], format="csc")
        lo_s = np.full(m, -np.inf)
        up_s = np.full(m, np.inf)
        ge = mdl.senses == SENSE_GE
        le = mdl.senses == SENSE_LE
        eq = mdl.senses == SENSE_EQ
        lo_s[ge | eq] = mdl.rhs[ge | eq]
        up_s[le | eq] = mdl.rhs[le | eq]
        self.lb = np.concatenate([mdl.lower, lo_s])
        self.ub = np.concatenate([mdl.upper, up_s])
        self.cost = np.concatenate([mdl.obj, np.zeros(m)])
        self.n_art = 0
        self.art_rows = np.zeros(0, dtype=int)
        self.art_sign = np.zeros(0)
        self.iterations = 0
        self.max_iter = params.max_iter or (20 * (m + n) + 5000)
        self.factor = None

    # -- column access ---------------------------------------------------------
    @property
    def ncols(self):
        return self.n + self.m + self.n_art

    def _truncate_k(self):
        """Drop artificial columns."""
        keep = self.n + self.m
        if self.dense:
            if self.kd.shape[1] != keep:
                self.kd = self.kd[:, :keep]
        elif self.kmat.shape[1] != keep:
            self.kmat = self.kmat[:, :keep]

    def _append_k(self, rows, sign):
        k = rows.size
        if self.dense:
            art = np.zeros((self.m, k))
            art[rows, np.arange(k)] = sign
            self.kd = np.hstack([self.kd, art])
        else:
            art = sp.csc_matrix((sign, (rows, np.arange(k))), shape=(self.m, k))
            self.kmat = sp.hstack([self.kmat, art], format="csc")

    def column(self, j):
        if self.dense:
            return self.kd[:, j].copy()
        col = np.zeros(self.m)
        sl = slice(self.kmat.indptr[j], self.kmat.indptr[j + 1])
        col[self.kmat.indices[sl]] = self.kmat.data[sl]
        return col

    def ktrans(self, y):
        if self.dense:
            return y @ self.kd
        out = np.empty(self.ncols)
        out[:self.n] = self.at_csr @ y
        out[self.n:self.n + self.m] = -y
        if self.n_art:
            out[self.n + self.m:] = self.art_sign * y[self.art_rows]
        return out

    # -- factorization -----------------------------------------------------------
    def refactor(self):
        bmat = self.kd[:, self.head] if self.dense else self.kmat[:, self.head]
        self.factor = _Factor(bmat, self.p.pivot_tol)
        self.recompute_primal()

    def recompute_primal(self):
        nb = self.status != _BASIC
        if not nb.any():
            rhs = np.zeros(self.m)
        elif self.dense:
            rhs = -(self.kd[:, nb] @ self.x[nb])
        else:
            rhs = -(self.kmat[:, nb] @ self.x[nb])
        self.x[self.head] = self.factor.ftran(rhs)

    def _safe_refactor(self):
        for attempt in range(self.p.max_retries + 1):
            try:
                self.refactor()
                return
            except NumericalFailure:
                if attempt == self.p.max_retries:
                    raise
                self._repair_basis()

    def _repair_basis(self):
        """Swap dependent basic columns for row logicals (crash repair)."""
        bmat = self.kd[:, self.head] if self.dense else self.kmat[:, self.head].toarray()
        _, r, perm = sla.qr(bmat, pivoting=True, mode="economic")
        diag = np.abs(np.diag(r))
        rank = int(np.sum(diag > 1e-9 * max(1.0, diag.max(initial=0.0))))
        dependent = perm[rank:]
        in_basis = set(self.head.tolist())
        free_logicals = [self.n + i for i in range(self.m) if self.n + i not in in_basis]
        for pos, j in zip(dependent, free_logicals):
            old = self.head[pos]
            self.status[old] = self._nonbasic_status(old)
            self.x[old] = self._nonbasic_value(old)
            self.head[pos] = j
            self.status[j] = _BASIC
        logger.debug("basis repair replaced %d columns", len(dependent))

    def _nonbasic_status(self, j):
        if np.isfinite(self.lb[j]):
            return _AT_LOWER
        if np.isfinite(self.ub[j]):
            return _AT_UPPER
        return _FREE

    def _nonbasic_value(self, j):
        st = self._nonbasic_status(j)
        return self.lb[j] if st == _AT_LOWER else (self.ub[j] if st == _AT_UPPER else 0.0)

    # -- driver ------------------------------------------------------------------
    def solve(self, warm_start=None):
        if warm_start is not None and self._load_basis(warm_start):
            try:
                status = self._dual_simplex()
                if status == OPTIMAL:
                    status = self._primal(self.cost)
            except _LostFeasibility:
                status = None
            if status is not None:
                return self._finish(status)
            logger.debug("warm start abandoned, cold restart")
        for _ in range(self.p.max_retries):
            try:
                return self._cold_solve()
            except _LostFeasibility:
                # bounds drifted after refactorization: restart from the slack basis
                logger.debug("primal feasibility lost, restarting")
        raise NumericalFailure("primal feasibility lost repeatedly")

    def _cold_solve(self):
        self._crash()
        if self.n_art:
            phase1_cost = np.zeros(self.ncols)
            phase1_cost[self.n + self.m:] = 1.0
            status = self._primal(phase1_cost, phase=1)
            if status == UNBOUNDED:
                raise NumericalFailure("phase 1 reported an unbounded ray")
            infeas = float(self.x[self.n + self.m:].sum())
            scale = 1.0 + np.abs(self.model.rhs).max(initial=0.0)
            if infeas > self.p.feas_tol * scale:
                return self._finish(INFEASIBLE)
            self._drive_out_artificials()
        status = self._primal(self._full_cost())
        return self._finish(status)

    def _full_cost(self):
        if self.n_art:
            return np.concatenate([self.cost, np.zeros(self.n_art)])
        return self.cost

    def _crash(self):
        """Slack basis; rows whose logical would start out of bounds get an artificial."""
        n, m = self.n, self.m
        self.n_art = 0
        self._truncate_k()
        self.lb = self.lb[:n + m]
        self.ub = self.ub[:n + m]
        self.x = np.zeros(n + m)
        self.status = np.empty(n + m, dtype=np.int8)
        for j in range(n):
            self.status[j] = self._nonbasic_status(j)
            self.x[j] = self._nonbasic_value(j)
        act = (self.a_dense if self.dense else self.a_csc) @ self.x[:n]
        lo, up = self.lb[n:], self.ub[n:]
        target = np.clip(act, lo, up)
        bad = np.flatnonzero(np.abs(target - act) > 0.0)
        head = np.arange(n, n + m)
        self.status[n:] = _BASIC
        self.x[n:] = act
        if bad.size:
            sign = np.sign(target[bad] - act[bad])
            self.art_rows = bad
            self.art_sign = sign
            self.n_art = bad.size
            self._append_k(bad, sign)
            self.lb = np.concatenate([self.lb, np.zeros(bad.size)])
            self.ub = np.concatenate([self.ub, np.full(bad.size, np.inf)])
            # logical of a violated row sits at the violated bound, the artificial carries the gap
            self.status[n + bad] = np.where(target[bad] == lo[bad], _AT_LOWER, _AT_UPPER)
            self.x[n + bad] = target[bad]
            self.status = np.concatenate([self.status, np.full(bad.size, _BASIC, dtype=np.int8)])
            self.x = np.concatenate([self.x, np.abs(target[bad] - act[bad])])
            head[bad] = n + m + np.arange(bad.size)
        self.head = head
        self._safe_refactor()

    def _drive_out_artificials(self):
        n, m = self.n, self.m
        art_start = n + m
        for pos in range(m):
            j = self.head[pos]
            if j < art_start:
                continue
            e = np.zeros(m)
            e[pos] = 1.0
            row = self.ktrans(self.factor.btran(e))
            cand = np.abs(row[:art_start])
            cand[self.status[:art_start] == _BASIC] = 0.0
            q = int(np.argmax(cand)) if cand.size else -1
            if q < 0 or cand[q] <= 1e-7:
                continue  # redundant row: the artificial stays basic at zero
            alpha = self.factor.ftran(self.column(q))
            self._pivot(pos, q, alpha, leave_status=_AT_LOWER)
        self.ub[art_start:] = 0.0
        for j in range(art_start, self.ncols):
            if self.status[j] != _BASIC:
                self.status[j] = _AT_LOWER
                self.x[j] = 0.0
        self._safe_refactor()

    def _load_basis(self, basis: Basis):
        n, m = self.n, self.m
        if basis.head.shape[0] != m or basis.status.shape[0] != n + m:
            return False
        self.n_art = 0
        self._truncate_k()
        self.lb = self.lb[:n + m]
        self.ub = self.ub[:n + m]
        self.head = np.array(basis.head, dtype=int)
        self.status = np.array(basis.status, dtype=np.int8)
        self.x = np.zeros(n + m)
        for j in np.flatnonzero(self.status != _BASIC):
            st = self.status[j]
            if st == _AT_LOWER and not np.isfinite(self.lb[j]):
                st = self._nonbasic_status(j)
            elif st == _AT_UPPER and not np.isfinite(self.ub[j]):
                st = self._nonbasic_status(j)
            elif st == _FREE and (np.isfinite(self.lb[j]) or np.isfinite(self.ub[j])):
                st = self._nonbasic_status(j)
            self.status[j] = st
            self.x[j] = self.lb[j] if st == _AT_LOWER else (self.ub[j] if st == _AT_UPPER else 0.0)
        try:
            self.refactor()
        except NumericalFailure:
            return False
        return True

    # -- primal simplex ----------------------------------------------------------
    def _primal(self, cost, phase=2):
        p = self.p
        degenerate = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(f"iteration limit {self.max_iter} reached")
            if self.factor.n_updates >= p.refactor_every:
                self._safe_refactor()
            y = self.factor.btran(cost[self.head])
            d = cost - self.ktrans(y)
            q, direction = self._price(d, bland)
            if q < 0:
                if self._primal_drift() > 10 * p.feas_tol:
                    self._safe_refactor()
                    if self._primal_drift() > 10 * p.feas_tol:
                        raise _LostFeasibility()
                return OPTIMAL
            alpha = self.factor.ftran(self.column(q))
            step, r, to_upper = self._ratio_test(alpha, q, direction, bland)
            if step is None:
                return UNBOUNDED
            self.iterations += 1
            if step <= 1e-12:
                degenerate += 1
                if degenerate >= p.bland_after and not bland:
                    bland = True
                    logger.debug("Bland's rule engaged after %d degenerate pivots", degenerate)
            else:
                degenerate = 0
                bland = False
            self._move(alpha, q, direction * step)
            if r is None:
                self.status[q] = _AT_UPPER if direction > 0 else _AT_LOWER
                self.x[q] = self.ub[q] if direction > 0 else self.lb[q]
            else:
                self._pivot(r, q, alpha, leave_status=_AT_UPPER if to_upper else _AT_LOWER)
            if p.log_every and self.iterations % p.log_every == 0:
                logger.info("iter %d phase %d obj %.10g", self.iterations, phase,
                            float(cost @ self.x))

    def _primal_drift(self):
        xb = self.x[self.head]
        return float(max(np.max(self.lb[self.head] - xb, initial=0.0),
                         np.max(xb - self.ub[self.head], initial=0.0)))

    def _price(self, d, bland):
        tol = self.p.opt_tol
        st = self.status
        fixed = self.lb == self.ub
        score = np.zeros_like(d)
        at_lo = (st == _AT_LOWER) & ~fixed & (d < -tol)
        at_up = (st == _AT_UPPER) & ~fixed & (d > tol)
        free = (st == _FREE) & (np.abs(d) > tol)
        score[at_lo] = -d[at_lo]
        score[at_up] = d[at_up]
        score[free] = np.abs(d[free])
        cand = np.flatnonzero(score > 0)
        if cand.size == 0:
            return -1, 0
        q = int(cand[0]) if bland else int(cand[np.argmax(score[cand])])
        direction = 1 if (st[q] == _AT_LOWER or (st[q] == _FREE and d[q] < 0)) else -1
        return q, direction

    def _ratio_test(self, alpha, q, direction, bland):
        """Two-pass Harris ratio test. Returns (step, leaving position, leaves at upper)."""
        tol = self.p.feas_tol
        ptol = self.p.pivot_tol
        head = self.head
        xb = self.x[head]
        lb = self.lb[head]
        ub = self.ub[head]
        rate = -direction * alpha  # d x_B / d step
        dec = (rate < -ptol) & np.isfinite(lb)
        inc = (rate > ptol) & np.isfinite(ub)
        flip = self.ub[q] - self.lb[q]
        lim_relaxed = np.full(self.m, np.inf)
        lim_relaxed[dec] = (xb[dec] - lb[dec] + tol) / -rate[dec]
        lim_relaxed[inc] = (ub[inc] + tol - xb[inc]) / rate[inc]
        theta = lim_relaxed.min(initial=np.inf)
        if not np.isfinite(theta) and not np.isfinite(flip):
            return None, None, False
        if flip <= theta:
            return flip, None, False
        lim = np.full(self.m, np.inf)
        lim[dec] = (xb[dec] - lb[dec]) / -rate[dec]
        lim[inc] = (ub[inc] - xb[inc]) / rate[inc]
        elig = np.flatnonzero(lim <= theta)
        if bland:
            r = int(elig[np.argmin(head[elig])])
        else:
            r = int(elig[np.argmax(np.abs(alpha[elig]))])
        step = max(lim[r], 0.0)
        return step, r, bool(inc[r])

    def _move(self, alpha, q, delta):
        if delta != 0.0:
            self.x[self.head] -= delta * alpha
            self.x[q] += delta

    def _pivot(self, r, q, alpha, leave_status):
        leaving = self.head[r]
        self.status[leaving] = leave_status
        if leave_status == _AT_LOWER and np.isfinite(self.lb[leaving]):
            self.x[leaving] = self.lb[leaving]
        elif leave_status == _AT_UPPER and np.isfinite(self.ub[leaving]):
            self.x[leaving] = self.ub[leaving]
        elif not (np.isfinite(self.lb[leaving]) or np.isfinite(self.ub[leaving])):
            self.status[leaving] = _FREE
        self.head[r] = q
        self.status[q] = _BASIC
        self.factor.update(r, alpha)

    # -- dual simplex --------------------------------------------------------------
    def _dual_simplex(self):
        """Dual simplex from a dual-feasible basis; returns None when not dual feasible."""
        p = self.p
        cost = self.cost
        y = self.factor.btran(cost[self.head])
        d = cost - self.ktrans(y)
        if self._dual_infeasibility(d) > 10 * p.opt_tol:
            return None
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(f"iteration limit {self.max_iter} reached")
            if self.factor.n_updates >= p.refactor_every:
                self._safe_refactor()
                y = self.factor.btran(cost[self.head])
                d = cost - self.ktrans(y)
            xb = self.x[self.head]
            below = self.lb[self.head] - xb
            above = xb - self.ub[self.head]
            infeas = np.maximum(below, above)
            r = int(np.argmax(infeas))
            if infeas[r] <= p.feas_tol:
                return OPTIMAL
            go_lower = below[r] > 0
            e = np.zeros(self.m)
            e[r] = 1.0
            row = self.ktrans(self.factor.btran(e))
            q = self._dual_ratio(row, d, go_lower)
            if q < 0:
                return INFEASIBLE
            alpha = self.factor.ftran(self.column(q))
            if abs(alpha[r]) <= p.pivot_tol:
                raise _LostFeasibility()
            leaving = self.head[r]
            target = self.lb[leaving] if go_lower else self.ub[leaving]
            delta = (self.x[leaving] - target) / alpha[r]
            self._move(alpha, q, delta)
            theta_d = d[q] / row[q]
            d = d - theta_d * row
            d[leaving] = -theta_d
            d[q] = 0.0
            self.iterations += 1
            self._pivot(r, q, alpha, leave_status=_AT_LOWER if go_lower else _AT_UPPER)
            self.x[leaving] = target

    def _dual_infeasibility(self, d):
        st = self.status
        fixed = self.lb == self.ub
        v = np.zeros_like(d)
        lo = (st == _AT_LOWER) & ~fixed
        up = (st == _AT_UPPER) & ~fixed
        fr = st == _FREE
        v[lo] = np.maximum(-d[lo], 0.0)
        v[up] = np.maximum(d[up], 0.0)
        v[fr] = np.abs(d[fr])
        return float(v.max(initial=0.0))

    def _dual_ratio(self, row, d, go_lower):
        ptol = self.p.pivot_tol
        st = self.status
        fixed = self.lb == self.ub
        # increasing x_B[r] (go_lower) needs sum(row_j * dx_j) < 0
        sgn = -1.0 if go_lower else 1.0
        a = sgn * row
        lo = (st == _AT_LOWER) & ~fixed & (a > ptol)
        up = (st == _AT_UPPER) & ~fixed & (a < -ptol)
        fr = (st == _FREE) & (np.abs(a) > ptol)
        elig = np.flatnonzero(lo | up | fr)
        if elig.size == 0:
            return -1
        ratios = np.abs(d[elig]) / np.abs(a[elig])
        tol = self.p.opt_tol
        relaxed = ((np.abs(d[elig]) + tol) / np.abs(a[elig])).min()
        ok = elig[ratios <= relaxed]
        return int(ok[np.argmax(np.abs(a[ok]))])

    # -- results -------------------------------------------------------------------
    def _finish(self, status):
        n, m = self.n, self.m
        mdl = self.model
        x = self.x[:n].copy()
        if status == OPTIMAL:
            cost = self._full_cost()
            y = self.factor.btran(cost[self.head])
            d = cost - self.ktrans(y)
            obj = float(mdl.obj @ x + mdl.obj_const)
            basis = Basis(self.head.copy(), self.status[:n + m].copy()) if self.n_art == 0 or \
                np.all(self.head < n + m) else None
            return LpSolution(OPTIMAL, obj, x, y.copy(), d[:n].copy(), self.iterations, basis)
        obj = np.inf if status == INFEASIBLE else -np.inf
        return LpSolution(status, obj, x, np.full(m, np.nan), np.full(n, np.nan), self.iterations)


def _solve_highs(model: LpModel, params: LpParams):
    from scipy.optimize import linprog

    mdl = model.as_min()
    a = sp.csr_matrix(mdl.a_mat)
    ge = mdl.senses == SENSE_GE
    le = mdl.senses == SENSE_LE
    eq = mdl.senses == SENSE_EQ
    ub_rows = np.flatnonzero(ge | le)
    sign = np.where(ge[ub_rows], -1.0, 1.0)
    a_ub = sp.diags(sign) @ a[ub_rows] if ub_rows.size else None
    b_ub = sign * mdl.rhs[ub_rows] if ub_rows.size else None
    eq_rows = np.flatnonzero(eq)
    a_eq = a[eq_rows] if eq_rows.size else None
    b_eq = mdl.rhs[eq_rows] if eq_rows.size else None
    bounds = np.column_stack([np.where(np.isfinite(mdl.lower), mdl.lower, -np.inf),
                              np.where(np.isfinite(mdl.upper), mdl.upper, np.inf)])
    res = linprog(mdl.obj, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                  method="highs",
                  options={"primal_feasibility_tolerance": params.feas_tol,
                           "dual_feasibility_tolerance": params.opt_tol})
    n, m = model.n_vars, model.n_rows
    flip = -1.0 if model.sense == "max" else 1.0
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        duals = np.zeros(m)
        if ub_rows.size:
            duals[ub_rows] = sign * res.ineqlin.marginals
        if eq_rows.size:
            duals[eq_rows] = res.eqlin.marginals
        red = res.lower.marginals + res.upper.marginals
        obj = float(mdl.obj @ res.x + mdl.obj_const)
        return LpSolution(OPTIMAL, flip * obj, np.asarray(res.x), flip * duals, flip * red, iters)
    if res.status == 2:
        return LpSolution(INFEASIBLE, flip * np.inf, np.full(n, np.nan), np.full(m, np.nan),
                          np.full(n, np.nan), iters)
    if res.status == 3:
        return LpSolution(UNBOUNDED, -flip * np.inf, np.full(n, np.nan), np.full(m, np.nan),
                          np.full(n, np.nan), iters)
    raise NumericalFailure(f"HiGHS failed: {res.message}")
