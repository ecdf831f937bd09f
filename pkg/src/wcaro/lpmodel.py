"""Explicit constraint-matrix LP/MIP containers.

An :class:`LpModel` is ``sense { obj @ v + obj_const : rows(v) ~ rhs, lower <= v <= upper }``.
Optionally the objective and right-hand side depend affinely on an external
parameter vector ``p`` (``obj + obj_param @ p`` and ``rhs + rhs_param @ p``); the
reformulation pipeline uses this to keep first-level variables symbolic until
they are merged into the single-level model.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from ._validation import (SENSE_EQ, SENSE_GE, SENSE_LE, check_matrix, check_senses,
                          check_vector)
from .exceptions import DimensionMismatch


@dataclass(frozen=True, eq=False)
class LpModel:
    obj: np.ndarray
    a_mat: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sense: str = "min"
    obj_const: float = 0.0
    var_names: tuple = ()
    row_names: tuple = ()
    obj_param: sp.csr_matrix | None = None
    rhs_param: sp.csr_matrix | None = None
    param_names: tuple = ()

    def __post_init__(self):
        n = self.obj.shape[0]
        m = self.rhs.shape[0]
        if self.a_mat.shape != (m, n):
            raise DimensionMismatch(f"constraint matrix {self.a_mat.shape} != ({m}, {n})")
        if self.senses.shape[0] != m:
            raise DimensionMismatch("senses/rhs length mismatch")
        if self.lower.shape[0] != n or self.upper.shape[0] != n:
            raise DimensionMismatch("bounds length mismatch")
        if np.any(self.lower > self.upper):
            bad = int(np.flatnonzero(self.lower > self.upper)[0])
            raise ValueError(f"column {bad}: lower bound exceeds upper bound")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        if self.var_names and len(self.var_names) != n:
            raise DimensionMismatch("var_names length mismatch")
        if self.row_names and len(self.row_names) != m:
            raise DimensionMismatch("row_names length mismatch")
        p = len(self.param_names)
        if self.obj_param is not None and self.obj_param.shape != (n, p):
            raise DimensionMismatch("obj_param shape mismatch")
        if self.rhs_param is not None and self.rhs_param.shape != (m, p):
            raise DimensionMismatch("rhs_param shape mismatch")

    @classmethod
    def build(cls, obj, a_mat, senses, rhs, lower=None, upper=None, sense="min",
              obj_const=0.0, var_names=(), row_names=(), **kw):
        """Coercing constructor; default bounds are ``[0, inf)``."""
        obj = check_vector(obj, name="obj")
        n = obj.shape[0]
        rhs = check_vector(rhs, name="rhs")
        m = rhs.shape[0]
        a_mat = check_matrix(a_mat, shape=(m, n), name="a_mat")
        senses = check_senses(senses, m)
        lower = check_vector(lower, n, "lower", fill=0.0, allow_inf=True)
        upper = check_vector(upper, n, "upper", fill=np.inf, allow_inf=True)
        return cls(obj, a_mat, senses, rhs, lower, upper, sense, float(obj_const),
                   tuple(var_names), tuple(row_names), **kw)

    @property
    def n_vars(self):
        return self.obj.shape[0]

    @property
    def n_rows(self):
        return self.rhs.shape[0]

    @property
    def has_params(self):
        return bool(self.param_names)

    def var_index(self, name):
        return self.var_names.index(name)

    def objective_value(self, v):
        return float(self.obj @ v + self.obj_const)

    def row_activity(self, v):
        return self.a_mat @ v

    def primal_residual(self, v):
        """Largest violation of rows and bounds at ``v`` (0 when feasible)."""
        act = self.a_mat @ v
        viol = np.zeros(self.n_rows)
        ge = self.senses == SENSE_GE
        le = self.senses == SENSE_LE
        eq = self.senses == SENSE_EQ
        viol[ge] = np.maximum(self.rhs[ge] - act[ge], 0.0)
        viol[le] = np.maximum(act[le] - self.rhs[le], 0.0)
        viol[eq] = np.abs(act[eq] - self.rhs[eq])
        bnd = np.maximum(np.maximum(self.lower - v, v - self.upper), 0.0)
        return float(max(viol.max(initial=0.0), bnd.max(initial=0.0)))

    def bind_params(self, p):
        """Substitute a numeric parameter vector, returning a parameter-free model."""
        if not self.has_params:
            return self
        p = check_vector(p, len(self.param_names), "params")
        obj = self.obj + (self.obj_param @ p if self.obj_param is not None else 0.0)
        rhs = self.rhs + (self.rhs_param @ p if self.rhs_param is not None else 0.0)
        return replace(self, obj=np.asarray(obj, dtype=float), rhs=np.asarray(rhs, dtype=float),
                       obj_param=None, rhs_param=None, param_names=())

    def with_rows(self, a_rows, senses, rhs, names=()):
        a_rows = check_matrix(a_rows, shape=(len(rhs), self.n_vars), name="a_rows")
        senses = check_senses(senses, len(rhs))
        rhs_param = self.rhs_param
        if rhs_param is not None:
            rhs_param = sp.vstack([rhs_param, sp.csr_matrix((len(rhs), rhs_param.shape[1]))],
                                  format="csr")
        row_names = ()
        if self.row_names or names:
            old = self.row_names or tuple(f"r{i}" for i in range(self.n_rows))
            new = tuple(names) if len(names) == len(rhs) else tuple(
                f"r{self.n_rows + i}" for i in range(len(rhs)))
            row_names = old + new
        return replace(self,
                       a_mat=sp.vstack([self.a_mat, a_rows], format="csr"),
                       senses=np.concatenate([self.senses, senses]),
                       rhs=np.concatenate([self.rhs, np.asarray(rhs, dtype=float)]),
                       row_names=row_names, rhs_param=rhs_param)

    def with_bounds(self, lower=None, upper=None):
        return replace(self,
                       lower=self.lower if lower is None else np.asarray(lower, dtype=float),
                       upper=self.upper if upper is None else np.asarray(upper, dtype=float))

    def as_min(self):
        """Equivalent minimization model (objective negated when ``sense == 'max'``)."""
        if self.sense == "min":
            return self
        return replace(self, obj=-self.obj, obj_const=-self.obj_const, sense="min",
                       obj_param=None if self.obj_param is None else -self.obj_param)


@dataclass(frozen=True, eq=False)
class MipModel:
    base: LpModel
    binary_cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        cols = np.asarray(self.binary_cols, dtype=int)
        object.__setattr__(self, "binary_cols", cols)
        if cols.size:
            if cols.min() < 0 or cols.max() >= self.base.n_vars:
                raise DimensionMismatch("binary column index out of range")
            if np.any(self.base.lower[cols] < 0) or np.any(self.base.upper[cols] > 1):
                raise ValueError("binary columns must have bounds within [0, 1]")

    @property
    def n_bin(self):
        return int(self.binary_cols.size)

    def fixed(self, values):
        """LP obtained by fixing every binary column to ``values`` via its bounds."""
        values = np.asarray(values, dtype=float)
        lo = self.base.lower.copy()
        up = self.base.upper.copy()
        lo[self.binary_cols] = values
        up[self.binary_cols] = values
        return self.base.with_bounds(lo, up)
