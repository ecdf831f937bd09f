"""Estimator-style facade over the reformulate, branch-and-bound and oracle steps."""
from __future__ import annotations

import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .branch_bound import MipParams, solve_mip
from .model import WcaroInstance, validate_instance
from .oracle import certify
from .reformulate import build_single_level
from .simplex import LpParams


class RobustMipApproximator(BaseEstimator):
    """Solve the single-level MIP that upper-bounds a weakly connected instance.

    Parameters
    ----------
    gap : float
        Relative optimality gap at which branch and bound stops.
    engine : {"native", "highs"}
        Branch-and-bound engine.
    segments : int
        Secant pieces per quadratic first-level term.
    node_limit : int, optional
    time_limit : float, optional
        Wall-clock limit in seconds.

    Attributes
    ----------
    instance_ : WcaroInstance
    solution_ : MipSolution
    x_ : ndarray
        First-level decision.
    y_ : ndarray
        Recourse part of the optimum, continuous entries first.
    objective_ : float
    wall_time_ : float
    """

    def __init__(self, gap=1e-6, engine="native", segments=16, node_limit=None,
                 time_limit=None):
        self.gap = gap
        self.engine = engine
        self.segments = segments
        self.node_limit = node_limit
        self.time_limit = time_limit

    def _mip_params(self):
        if self.engine not in ("native", "highs"):
            raise ValueError(f"unknown engine {self.engine!r}")
        return MipParams(gap_tol=self.gap, node_limit=self.node_limit,
                         time_limit=self.time_limit, lp=LpParams(), engine=self.engine)

    def fit(self, inst: WcaroInstance, y=None):
        """Build and solve the single-level model of ``inst``.

        ``y`` is ignored; it is accepted for signature compatibility only.
        """
        params = self._mip_params()
        report = validate_instance(inst)
        if not report.ok:
            raise ValueError("; ".join(report.errors))
        t0 = time.perf_counter()
        mip, layout = build_single_level(inst, segments=self.segments, return_layout=True)
        sol = solve_mip(mip, params)
        self.wall_time_ = time.perf_counter() - t0
        self.instance_ = inst
        self.layout_ = layout
        self.solution_ = sol
        self.objective_ = float(sol.objective)
        self.x_ = np.asarray(sol.primal[layout.x_slice], dtype=float)
        self.y_ = np.asarray(sol.primal[layout.y_slice], dtype=float)
        return self

    def certify(self, tol=1e-6, **kw):
        """Brute-force certificate of the fitted value (see ``oracle.certify``)."""
        if not hasattr(self, "solution_"):
            raise NotFittedError("call fit before certify")
        return certify(self.instance_, self.solution_, tol=tol, **kw)
