"""LP-based branch and bound for models whose integer columns are binary.

Search: depth-first dive in the rounding direction of the branching column,
then backtrack to the open node with the smallest bound (ties go to the oldest
node). Children start from the parent's optimal basis, so the LP engine only
has to repair primal feasibility with the dual simplex.
"""
from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ._validation import SENSE_GE, SENSE_LE
from .lpmodel import MipModel
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LpParams, solve_lp

logger = logging.getLogger(__name__)

GAP_LIMIT = "gap_limit"
NODE_LIMIT = "node_limit"


@dataclass(frozen=True)
class MipParams:
    gap_tol: float = 1e-6
    int_tol: float = 1e-6
    node_limit: int | None = None
    time_limit: float | None = None
    lp: LpParams = field(default_factory=LpParams)
    engine: str = "native"
    log_every: int = 0


@dataclass(eq=False)
class MipSolution:
    status: str
    objective: float
    best_bound: float
    primal: np.ndarray
    nodes: int
    gap: float
    bound_trace: list = field(default_factory=list, repr=False)
    lp_iterations: int = 0
    wall_time: float = 0.0

    @property
    def is_optimal(self):
        return self.status == OPTIMAL

    def to_dict(self):
        return {"status": self.status, "objective": _json_float(self.objective),
                "best_bound": _json_float(self.best_bound), "gap": _json_float(self.gap),
                "nodes": self.nodes, "lp_iterations": self.lp_iterations,
                "primal": [float(v) for v in self.primal]}


def _json_float(v):
    v = float(v)
    return v if np.isfinite(v) else ("inf" if v > 0 else "-inf")


def relative_gap(incumbent, bound):
    if not np.isfinite(incumbent):
        return np.inf
    if not np.isfinite(bound):
        return np.inf
    return max(incumbent - bound, 0.0) / max(1.0, abs(incumbent))


def solve_mip(mip: MipModel, params: MipParams | None = None) -> MipSolution:
    """Minimize (or maximize) over the model with binary columns integral."""
    params = params or MipParams()
    if params.engine == "highs":
        return _solve_highs(mip, params)
    if params.engine != "native":
        raise ValueError(f"unknown engine {params.engine!r}")
    base = mip.base
    if base.sense == "max":
        sol = _BranchAndBound(MipModel(base.as_min(), mip.binary_cols), params).run()
        sol.objective = -sol.objective
        sol.best_bound = -sol.best_bound
        sol.bound_trace = [-b for b in sol.bound_trace]
        return sol
    return _BranchAndBound(mip, params).run()


class _BranchAndBound:
    def __init__(self, mip, params):
        self.mip = mip
        self.p = params
        self.base = mip.base
        self.cols = mip.binary_cols
        self.incumbent = np.inf
        self.best_x = np.full(self.base.n_vars, np.nan)
        self.heap = []
        self.seq = 0
        self.nodes = 0
        self.iters = 0
        self.trace = []
        self.pruned_min = np.inf  # smallest bound among nodes closed by the gap test

    def _lp(self, lo, up, basis):
        sol = solve_lp(self.base.with_bounds(lo, up), self.p.lp, warm_start=basis)
        self.iters += sol.iterations
        return sol

    def _prunable(self, bound):
        if not np.isfinite(self.incumbent):
            return False
        if self.incumbent - bound <= self.p.gap_tol * max(1.0, abs(self.incumbent)):
            self.pruned_min = min(self.pruned_min, bound)
            return True
        return False

    def _open_bound(self, extra=np.inf):
        b = min(extra, self.heap[0][0] if self.heap else np.inf)
        return min(b, self.incumbent, self.pruned_min)

    def _branch_col(self, x):
        if self.cols.size == 0:
            return None, None
        vals = x[self.cols]
        frac = np.abs(vals - np.round(vals))
        k = int(np.argmax(frac))  # first index among ties
        if frac[k] <= self.p.int_tol:
            return None, None
        return int(self.cols[k]), float(vals[k])

    def run(self):
        t0 = time.perf_counter()
        lo0 = self.base.lower.copy()
        up0 = self.base.upper.copy()
        status = OPTIMAL
        # open nodes carry (parent bound, seq, lower, upper, basis)
        node = (-np.inf, 0, lo0, up0, None)
        while node is not None:
            bound_in, _, lo, up, basis = node
            if self.p.node_limit is not None and self.nodes >= self.p.node_limit:
                heapq.heappush(self.heap, (bound_in, self._next(), lo, up, basis))
                status = NODE_LIMIT
                break
            if self.p.time_limit is not None and time.perf_counter() - t0 > self.p.time_limit:
                heapq.heappush(self.heap, (bound_in, self._next(), lo, up, basis))
                status = GAP_LIMIT
                break
            self.nodes += 1
            node = None
            if self._prunable(bound_in):
                node = self._pop()
                self._record(node)
                continue
            sol = self._lp(lo, up, basis)
            if sol.status == UNBOUNDED:
                if self.nodes == 1:
                    return self._result(UNBOUNDED, t0, bound=-np.inf)
                raise ArithmeticError("unbounded LP relaxation below the root")
            if sol.status == INFEASIBLE or self._prunable(sol.objective):
                node = self._pop()
                self._record(node)
                continue
            j, v = self._branch_col(sol.primal)
            if j is None:
                self.incumbent = sol.objective
                x = sol.primal.copy()
                x[self.cols] = np.round(x[self.cols])
                self.best_x = x
                self._prune_heap()
                node = self._pop()
                self._record(node)
                continue
            down_up = up.copy()
            down_up[j] = 0.0
            up_lo = lo.copy()
            up_lo[j] = 1.0
            # the parent's bound stays valid for the subtree, which absorbs LP roundoff
            child_bound = max(sol.objective, bound_in)
            down = (child_bound, self._next(), lo, down_up, sol.basis)
            upn = (child_bound, self._next(), up_lo, up, sol.basis)
            dive, other = (upn, down) if v >= 0.5 else (down, upn)
            heapq.heappush(self.heap, other)
            node = dive
            self._record(node)
            if self.p.log_every and self.nodes % self.p.log_every == 0:
                logger.info("node %d inc %.10g bound %.10g open %d", self.nodes, self.incumbent,
                            self._open_bound(node[0]), len(self.heap))
        if status == OPTIMAL and not np.isfinite(self.incumbent):
            return self._result(INFEASIBLE, t0, bound=np.inf)
        return self._result(status, t0)

    def _next(self):
        self.seq += 1
        return self.seq

    def _pop(self):
        return heapq.heappop(self.heap) if self.heap else None

    def _prune_heap(self):
        keep = [n for n in self.heap if not self._prunable(n[0])]
        if len(keep) != len(self.heap):
            heapq.heapify(keep)
            self.heap = keep

    def _record(self, node):
        self.trace.append(self._open_bound(node[0] if node is not None else np.inf))

    def _result(self, status, t0, bound=None):
        if bound is None:
            bound = self._open_bound()
        gap = relative_gap(self.incumbent, bound)
        obj = self.incumbent
        if status == UNBOUNDED:
            obj = -np.inf
        return MipSolution(status, float(obj), float(bound), self.best_x, self.nodes, gap,
                           self.trace, self.iters, time.perf_counter() - t0)


def _solve_highs(mip: MipModel, params: MipParams) -> MipSolution:
    import scipy.sparse as sp
    from scipy.optimize import Bounds, LinearConstraint, milp

    t0 = time.perf_counter()
    m = mip.base.as_min()
    lo_r = np.where(m.senses == SENSE_LE, -np.inf, m.rhs)
    up_r = np.where(m.senses == SENSE_GE, np.inf, m.rhs)
    integrality = np.zeros(m.n_vars)
    integrality[mip.binary_cols] = 1
    cons = [LinearConstraint(sp.csr_matrix(m.a_mat), lo_r, up_r)] if m.n_rows else []
    opts = {"mip_rel_gap": params.gap_tol, "disp": False}
    if params.time_limit is not None:
        opts["time_limit"] = params.time_limit
    if params.node_limit is not None:
        opts["node_limit"] = params.node_limit
    res = milp(m.obj, constraints=cons, integrality=integrality,
               bounds=Bounds(m.lower, m.upper), options=opts)
    flip = -1.0 if mip.base.sense == "max" else 1.0
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    wall = time.perf_counter() - t0
    if res.x is None:
        status = {2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, GAP_LIMIT)
        obj = np.inf if status == INFEASIBLE else -np.inf
        return MipSolution(status, flip * obj, flip * obj, np.full(m.n_vars, np.nan), nodes,
                           np.inf, [], 0, wall)
    obj = float(res.fun + m.obj_const)
    dual_bound = getattr(res, "mip_dual_bound", None)
    bound = float((res.fun if dual_bound is None else dual_bound) + m.obj_const)
    status = OPTIMAL if res.status == 0 else GAP_LIMIT
    x = np.asarray(res.x, dtype=float)
    x[mip.binary_cols] = np.round(x[mip.binary_cols])
    return MipSolution(status, flip * obj, flip * bound, x, nodes, relative_gap(obj, bound),
                       [], 0, wall)
