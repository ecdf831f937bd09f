"""Problem data for weakly connected trilevel adjustable robust problems.

The problem is

    min_x  G(x) + max_{h in Omega} min_{y in Y(x, h)} c @ y

with ``Y(x, h) = {y : A' y >= b', B y >= B_x x + B_h h + b0}`` and the trailing
``n_bin`` entries of ``y`` binary. First-level variables and the uncertainty only
touch the right-hand side of the coupled rows ``B y >= ...``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from ._validation import (SENSE_EQ, SENSE_GE, SENSE_LE, check_matrix, check_senses,
                          check_vector)
from .exceptions import EmptyOmega, UnboundedOmega, UnboundedVariable
from .lpmodel import LpModel

NNZ_BH_WARN = 20000


@dataclass(frozen=True, eq=False)
class Polytope:
    """``{v : a_mat @ v (senses) rhs, lower <= v <= upper}``; bounds default to free."""
    a_mat: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def build(cls, a_mat=None, senses=None, rhs=(), lower=None, upper=None, dim=None):
        rhs = check_vector(rhs, name="rhs")
        if dim is None:
            if a_mat is None:
                raise ValueError("dim is required when a_mat is omitted")
            dim = np.shape(a_mat)[1] if not sp.issparse(a_mat) else a_mat.shape[1]
        a_mat = check_matrix(a_mat, shape=(rhs.shape[0], dim), name="a_mat")
        senses = check_senses(senses, rhs.shape[0])
        lower = check_vector(lower, dim, "lower", fill=-np.inf, allow_inf=True)
        upper = check_vector(upper, dim, "upper", fill=np.inf, allow_inf=True)
        return cls(a_mat, senses, rhs, lower, upper)

    def __post_init__(self):
        m = self.rhs.shape[0]
        if self.a_mat.shape[0] != m or self.senses.shape[0] != m:
            raise ValueError("row count of a_mat, senses and rhs must agree")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def dim(self):
        return self.a_mat.shape[1]

    def contains(self, v, tol=1e-9):
        v = np.asarray(v, dtype=float)
        if np.any(v < self.lower - tol) or np.any(v > self.upper + tol):
            return False
        act = self.a_mat @ v
        ok_ge = act[self.senses == SENSE_GE] >= self.rhs[self.senses == SENSE_GE] - tol
        ok_le = act[self.senses == SENSE_LE] <= self.rhs[self.senses == SENSE_LE] + tol
        ok_eq = np.abs(act[self.senses == SENSE_EQ] - self.rhs[self.senses == SENSE_EQ]) <= tol
        return bool(ok_ge.all() and ok_le.all() and ok_eq.all())

    def as_lp(self, obj=None, sense="min"):
        obj = np.zeros(self.dim) if obj is None else obj
        return LpModel.build(obj, self.a_mat, self.senses, self.rhs, self.lower, self.upper,
                             sense=sense)

    def coordinate_range(self, i, params=None):
        """Exact ``(min, max)`` of coordinate ``i`` by two LPs."""
        from .simplex import solve_lp

        e = np.zeros(self.dim)
        e[i] = 1.0
        out = []
        for sense in ("min", "max"):
            sol = solve_lp(self.as_lp(e, sense), params)
            if sol.status == "infeasible":
                raise EmptyOmega("polytope is empty")
            out.append(sol.objective)
        return out[0], out[1]


@dataclass(frozen=True, eq=False)
class OmegaStandard:
    """``{h : h_lower <= h, a_omega @ h + eta = b_omega, eta >= 0 on slack rows}``.

    Rows outside ``slack_rows`` are equalities. ``h_upper`` is implied by the rows
    and kept for the McCormick envelope.
    """
    a_omega: sp.csr_matrix
    b_omega: np.ndarray
    slack_rows: np.ndarray
    h_lower: np.ndarray
    h_upper: np.ndarray

    @property
    def dim(self):
        return self.a_omega.shape[1]

    @property
    def n_rows(self):
        return self.a_omega.shape[0]

    @property
    def n_slack(self):
        return int(np.count_nonzero(self.slack_rows))

    def contains(self, h, tol=1e-9):
        h = np.asarray(h, dtype=float)
        if np.any(h < self.h_lower - tol) or np.any(h > self.h_upper + tol):
            return False
        act = self.a_omega @ h
        s = self.slack_rows
        return bool(np.all(act[s] <= self.b_omega[s] + tol)
                    and np.all(np.abs(act[~s] - self.b_omega[~s]) <= tol))

    def slack_matrix(self):
        """Column block for ``eta``: one unit column per slack row."""
        rows = np.flatnonzero(self.slack_rows)
        return sp.csr_matrix((np.ones(rows.size), (rows, np.arange(rows.size))),
                             shape=(self.n_rows, rows.size))

    def to_polytope(self):
        senses = np.where(self.slack_rows, SENSE_LE, SENSE_EQ)
        return Polytope(self.a_omega, senses, self.b_omega, self.h_lower.copy(),
                        self.h_upper.copy())


@dataclass(frozen=True, eq=False)
class ThirdLevel:
    """Recourse data. ``y`` is free; sign restrictions belong in ``A' y >= b'``."""
    n_cont: int
    n_bin: int
    c: np.ndarray
    a_free: sp.csr_matrix
    b_free: np.ndarray
    b_coupled: sp.csr_matrix
    b_x: sp.csr_matrix
    b_h: sp.csr_matrix
    b0: np.ndarray
    beta_lower: np.ndarray | None = None
    beta_upper: np.ndarray | None = None
    free_senses: np.ndarray | None = None

    @classmethod
    def build(cls, n_cont, n_bin, c, a_free, b_free, b_coupled, b_x, b_h, b0,
              beta_lower=None, beta_upper=None, free_senses=None, n_x=None, n_h=None):
        ny = int(n_cont) + int(n_bin)
        b_free = check_vector(b_free, name="b_free")
        b0 = check_vector(b0, name="b0")
        nj = b0.shape[0]
        a_free = check_matrix(a_free, shape=(b_free.shape[0], ny), name="a_free")
        b_coupled = check_matrix(b_coupled, shape=(nj, ny), name="b_coupled")
        b_x = check_matrix(b_x, shape=None if n_x is None else (nj, n_x), name="b_x")
        b_h = check_matrix(b_h, shape=None if n_h is None else (nj, n_h), name="b_h")
        if beta_lower is not None:
            beta_lower = check_vector(beta_lower, nj, "beta_lower", allow_inf=True)
        if beta_upper is not None:
            beta_upper = check_vector(beta_upper, nj, "beta_upper", allow_inf=True)
        senses = None if free_senses is None else check_senses(free_senses, b_free.shape[0])
        return cls(int(n_cont), int(n_bin), check_vector(c, ny, "c"), a_free, b_free,
                   b_coupled, b_x, b_h, b0, beta_lower, beta_upper, senses)

    @property
    def n_y(self):
        return self.n_cont + self.n_bin

    @property
    def n_coupled(self):
        return self.b0.shape[0]

    @property
    def n_free_rows(self):
        return self.b_free.shape[0]

    @property
    def senses(self):
        if self.free_senses is None:
            return np.full(self.n_free_rows, SENSE_GE, dtype="<U1")
        return self.free_senses

    @property
    def nnz_bh(self):
        return int(self.b_h.nnz)

    @property
    def has_beta_bounds(self):
        return self.beta_lower is not None and self.beta_upper is not None

    @property
    def binary_index(self):
        return np.arange(self.n_cont, self.n_y)

    def with_beta_bounds(self, lower, upper):
        nj = self.n_coupled
        return replace(self, beta_lower=check_vector(lower, nj, "beta_lower", allow_inf=True),
                       beta_upper=check_vector(upper, nj, "beta_upper", allow_inf=True))


@dataclass(frozen=True, eq=False)
class FirstLevel:
    """``G(x) = obj_linear @ x + sum(obj_quadratic_diag * x**2) + obj_constant`` over a polytope.

    The trailing ``n_aux`` coordinates, when nonzero, are epigraph variables
    added by :func:`piecewise_linearize_objective`.
    """
    n_x: int
    feasible_set: Polytope
    obj_linear: np.ndarray
    obj_quadratic_diag: np.ndarray
    obj_constant: float = 0.0
    n_aux: int = 0

    @classmethod
    def build(cls, feasible_set, obj_linear=None, obj_quadratic_diag=None, obj_constant=0.0):
        n = feasible_set.dim
        return cls(n, feasible_set, check_vector(obj_linear, n, "obj_linear", fill=0.0),
                   check_vector(obj_quadratic_diag, n, "obj_quadratic_diag", fill=0.0),
                   float(obj_constant))

    @property
    def n_original(self):
        return self.n_x - self.n_aux

    def value(self, x):
        """True first-level cost at the original coordinates ``x``."""
        x = np.asarray(x, dtype=float)[:self.n_x]
        return float(self.obj_linear @ x + self.obj_quadratic_diag @ (x * x) + self.obj_constant)


@dataclass(frozen=True, eq=False)
class WcaroInstance:
    first: FirstLevel
    omega: OmegaStandard
    third: ThirdLevel
    name: str = "instance"

    @property
    def n_x(self):
        return self.first.n_x

    @property
    def n_h(self):
        return self.omega.dim

    def first_level_cost(self, x):
        return self.first.value(x)


@dataclass
class ValidationReport:
    ok: bool
    issues: list = field(default_factory=list)
    nnz_bh: int = 0
    dims: dict = field(default_factory=dict)

    @property
    def errors(self):
        return [msg for sev, msg in self.issues if sev == "error"]

    @property
    def warnings(self):
        return [msg for sev, msg in self.issues if sev == "warning"]

    def summary(self):
        lines = [f"ok={self.ok} nnz(B_h)={self.nnz_bh} dims={self.dims}"]
        lines += [f"{sev}: {msg}" for sev, msg in self.issues]
        return "\n".join(lines)


def validate_instance(inst: WcaroInstance, nnz_warn=NNZ_BH_WARN) -> ValidationReport:
    """Collect dimension, compactness, beta-bound and convexity findings. Never raises."""
    issues = []
    fl, om, tl = inst.first, inst.omega, inst.third
    nj = tl.n_coupled
    dims = {"n_x": fl.n_x, "n_h": om.dim, "n_y": tl.n_y, "n_bin": tl.n_bin, "n_J": nj,
            "k_omega": om.n_rows}

    def err(msg):
        issues.append(("error", msg))

    if tl.b_x.shape != (nj, fl.n_original) and tl.b_x.shape != (nj, fl.n_x):
        err(f"dimension mismatch: B_x is {tl.b_x.shape}, expected ({nj}, {fl.n_original})")
    if tl.b_h.shape != (nj, om.dim):
        err(f"dimension mismatch: B_h is {tl.b_h.shape}, expected ({nj}, {om.dim})")
    if tl.b_coupled.shape != (nj, tl.n_y):
        err(f"dimension mismatch: B is {tl.b_coupled.shape}, expected ({nj}, {tl.n_y})")
    if tl.a_free.shape != (tl.n_free_rows, tl.n_y):
        err("dimension mismatch: A' does not match b'/y")
    if tl.c.shape[0] != tl.n_y:
        err("dimension mismatch: c length differs from n_cont + n_bin")
    if om.h_lower.shape[0] != om.dim or om.h_upper.shape[0] != om.dim \
            or om.b_omega.shape[0] != om.n_rows or om.slack_rows.shape[0] != om.n_rows:
        err("dimension mismatch in Omega")
    elif not (np.all(np.isfinite(om.h_lower)) and np.all(np.isfinite(om.h_upper))):
        err("Ω not compact: infinite bound on h")
    elif np.any(om.h_lower > om.h_upper):
        err("Ω empty: h_lower exceeds h_upper")
    elif np.any(om.h_lower != 0):
        issues.append(("info", "h_lower is nonzero; shift_h_lower_bound will normalize it"))
    if fl.obj_linear.shape[0] != fl.n_x or fl.obj_quadratic_diag.shape[0] != fl.n_x:
        err("dimension mismatch: first-level objective length")
    elif np.any(fl.obj_quadratic_diag < 0):
        err("nonconvex quadratic: negative entry in obj_quadratic_diag")
    if not tl.has_beta_bounds:
        err("β bounds missing")
    elif tl.beta_lower.shape[0] != nj or tl.beta_upper.shape[0] != nj:
        err("dimension mismatch: β bound length")
    else:
        if np.any(tl.beta_lower < 0):
            err("β lower bound negative (duals of ≥ rows are nonnegative)")
        if np.any(tl.beta_lower > tl.beta_upper):
            err("β bounds crossed")
        rows_bh = np.unique(sp.coo_matrix(tl.b_h).row)
        if rows_bh.size and not np.all(np.isfinite(tl.beta_upper[rows_bh])):
            err("β upper bound infinite on a row with B_h entries")
    if tl.nnz_bh > nnz_warn:
        issues.append(("warning", f"nnz(B_h)={tl.nnz_bh} yields a large McCormick model"))
    ok = not any(sev == "error" for sev, _ in issues)
    return ValidationReport(ok, issues, tl.nnz_bh, dims)


def standardize_omega(p: Polytope) -> OmegaStandard:
    """Convert an inequality-form polytope to slack standard form with exact h bounds."""
    lo = np.empty(p.dim)
    up = np.empty(p.dim)
    for i in range(p.dim):
        lo[i], up[i] = p.coordinate_range(i)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(up))):
        bad = int(np.flatnonzero(~(np.isfinite(lo) & np.isfinite(up)))[0])
        raise UnboundedOmega(f"coordinate {bad} of Omega is unbounded")
    rows, rhs, slack = [], [], []
    ub_idx = np.flatnonzero(np.isfinite(p.upper))
    if ub_idx.size:
        rows.append(sp.csr_matrix((np.ones(ub_idx.size), (np.arange(ub_idx.size), ub_idx)),
                                  shape=(ub_idx.size, p.dim)))
        rhs.append(p.upper[ub_idx])
        slack.append(np.ones(ub_idx.size, dtype=bool))
    sign = np.where(p.senses == SENSE_GE, -1.0, 1.0)
    if p.rhs.size:
        rows.append(sp.diags(sign) @ p.a_mat)
        rhs.append(sign * p.rhs)
        slack.append(p.senses != SENSE_EQ)
    if rows:
        a = sp.vstack(rows, format="csr")
        b = np.concatenate(rhs)
        s = np.concatenate(slack)
    else:
        a, b, s = sp.csr_matrix((0, p.dim)), np.zeros(0), np.zeros(0, dtype=bool)
    a.eliminate_zeros()
    return OmegaStandard(a, b, s, lo, up)


def shift_h_lower_bound(inst: WcaroInstance):
    """Substitute ``h = h' + h_lower`` so that the new lower bound is zero.

    Returns the shifted instance and the shift vector.
    """
    om, tl = inst.omega, inst.third
    shift = om.h_lower.copy()
    if not np.any(shift):
        return inst, np.zeros_like(shift)
    omega = replace(om, b_omega=om.b_omega - om.a_omega @ shift,
                    h_lower=np.zeros_like(shift), h_upper=om.h_upper - shift)
    third = replace(tl, b0=tl.b0 + tl.b_h @ shift)
    return replace(inst, omega=omega, third=third), shift


def secant_pieces(coef, lo, hi, segments):
    """Slopes and intercepts of the chords of ``coef * t**2`` on ``segments`` equal pieces."""
    bp = np.linspace(lo, hi, segments + 1)
    slopes = coef * (bp[:-1] + bp[1:])
    intercepts = -coef * bp[:-1] * bp[1:]
    return bp, slopes, intercepts


def piecewise_linearize_objective(fl: FirstLevel, segments=16) -> FirstLevel:
    """Replace the separable quadratic part of ``G`` by its secant overestimator.

    Each quadratic coordinate ``x_i`` gets an epigraph variable ``t_i`` with rows
    ``t_i - slope_k x_i >= intercept_k``; minimizing ``t_i`` yields the piecewise
    linear interpolant of ``q_i x_i**2`` through the breakpoints. The result is
    convex, so no binaries are needed.
    """
    if segments < 1:
        raise ValueError("segments must be at least 1")
    quad = np.flatnonzero(fl.obj_quadratic_diag > 0)
    if quad.size == 0:
        return fl
    ps = fl.feasible_set
    n = fl.n_x
    rows, cols, vals, rhs = [], [], [], []
    r = 0
    for k, i in enumerate(quad):
        lo, hi = ps.lower[i], ps.upper[i]
        if not (np.isfinite(lo) and np.isfinite(hi)):
            try:
                lo2, hi2 = ps.coordinate_range(i)
            except EmptyOmega:
                raise UnboundedVariable(f"first-level set is empty (coordinate {i})") from None
            lo, hi = max(lo, lo2), min(hi, hi2)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise UnboundedVariable(f"quadratic coordinate {i} has no finite range")
        _, slopes, intercepts = secant_pieces(fl.obj_quadratic_diag[i], lo, hi, segments)
        for s, c0 in zip(slopes, intercepts):
            rows += [r, r]
            cols += [n + k, i]
            vals += [1.0, -s]
            rhs.append(c0)
            r += 1
    nq = quad.size
    a_old = sp.hstack([ps.a_mat, sp.csr_matrix((ps.a_mat.shape[0], nq))], format="csr")
    a_new = sp.csr_matrix((vals, (rows, cols)), shape=(r, n + nq))
    feas = Polytope(sp.vstack([a_old, a_new], format="csr"),
                    np.concatenate([ps.senses, np.full(r, SENSE_GE, dtype="<U1")]),
                    np.concatenate([ps.rhs, rhs]),
                    np.concatenate([ps.lower, np.full(nq, -np.inf)]),
                    np.concatenate([ps.upper, np.full(nq, np.inf)]))
    return FirstLevel(n + nq, feas, np.concatenate([fl.obj_linear, np.ones(nq)]),
                      np.zeros(n + nq), fl.obj_constant, fl.n_aux + nq)


def pwl_value(fl: FirstLevel, x, segments=16):
    """Secant overestimate of ``G(x)`` as seen by the linearized model."""
    x = np.asarray(x, dtype=float)[:fl.n_original]
    total = float(fl.obj_linear[:fl.n_original] @ x + fl.obj_constant)
    ps = fl.feasible_set
    for i in np.flatnonzero(fl.obj_quadratic_diag[:fl.n_original] > 0):
        lo, hi = ps.lower[i], ps.upper[i]
        if not (np.isfinite(lo) and np.isfinite(hi)):
            lo, hi = ps.coordinate_range(i)
        _, slopes, intercepts = secant_pieces(fl.obj_quadratic_diag[i], lo, hi, segments)
        total += float(np.max(slopes * x[i] + intercepts))
    return total
