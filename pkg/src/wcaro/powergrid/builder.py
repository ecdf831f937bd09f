"""Smart-converter scheduling model as a weakly connected trilevel instance.

First level ``x = (P_G[g,t], P_fl[t])``: day-ahead dispatch of conventional
units and the day-ahead purchase, tied together by the market-clearing row.
Second level ``h = P_DG_max[i,t]``: renewable availability inside Omega.
Third level ``y``: regulation, renewable deviations, intra-day trade, storage
operation and DC power flow, with charge/discharge indicators as binaries.

Per-(device, period) quantities are stored device-major, index ``d * T + t``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .._validation import SENSE_EQ, SENSE_GE
from ..exceptions import EmptyOmega, InfeasibleFirstLevel
from ..model import FirstLevel, OmegaStandard, Polytope, ThirdLevel, WcaroInstance
from .case import GridCase
from .timeseries import TimeSeries

CONVENTIONS = ("absolute", "signed")

# y blocks in storage order; the last two are binary
_Y_BLOCKS = ("P_G_reg", "P_G_up", "P_G_dn", "P_DG", "P_DG_up", "P_DG_dn", "P_sl", "P_ch",
             "P_dch", "p_line", "theta", "soc", "mu_ch", "mu_dch")


@dataclass(frozen=True)
class PowerBuildParams:
    """Build options.

    Parameters
    ----------
    R : float
        Guaranteed share of the aggregate renewable forecast, in [0, 1].
    soc_initial : array-like or None
        Initial state of charge per storage; midpoint of its range when None.
    penalty_convention : {"absolute", "signed"}
        ``absolute`` charges deviation magnitudes (``r+ P+ - r- P-``); ``signed``
        uses the products as written, which credits downward deviations.
    terminal_soc : bool
        Require the final state of charge to be at least the initial one.
    """
    R: float = 1.0
    soc_initial: object = None
    penalty_convention: str = "absolute"
    terminal_soc: bool = False

    def __post_init__(self):
        if not 0.0 <= float(self.R) <= 1.0:
            raise ValueError("R must lie in [0, 1]")
        if self.penalty_convention not in CONVENTIONS:
            raise ValueError(f"penalty_convention must be one of {CONVENTIONS}")


class BetaBounds(NamedTuple):
    lower: np.ndarray
    upper: np.ndarray
    exact: bool


@dataclass(frozen=True)
class PowerLayout:
    """Where each named block lives inside ``x`` and ``y``."""
    periods: int
    x_blocks: dict
    y_blocks: dict
    n_dg_rows: int
    balance_rows: np.ndarray
    free_row_names: tuple = ()
    coupled_row_names: tuple = ()

    def take(self, vec, name):
        """Block ``name`` of ``vec`` reshaped to ``(devices, periods)``."""
        blocks = self.x_blocks if name in self.x_blocks else self.y_blocks
        start, count = blocks[name]
        return np.asarray(vec[start:start + count * self.periods]).reshape(count, self.periods)


def forecast(case: GridCase, ts: TimeSeries):
    """Renewable forecast ``min((p_min + p_plus) / 2 * delta_dg, p_plus)`` as (|DG|, T)."""
    dg = case.dgs
    if len(dg) == 0:
        return np.zeros((0, ts.periods))
    mid = 0.5 * (dg.p_min + dg.p_plus)
    return np.minimum(np.outer(mid, ts.delta_dg), dg.p_plus[:, None])


def demand(case: GridCase, ts: TimeSeries):
    """Nodal demand per period as (|buses|, T)."""
    return np.outer(case.demand, ts.delta_d)


def beta_bounds_power(case: GridCase, ts: TimeSeries) -> BetaBounds:
    """Bounds on the duals of the renewable availability rows.

    ``lower = max(0, p_sl - f+)`` and
    ``upper = max(r+, r-, p_sl) - min(f+, f-)`` with the regulation prices taken
    as the maxima over all conventional units. The lower bound is clipped at zero
    because the rows are ``>=`` rows; the upper bound is raised to the lower one
    when the premises are violated so that the box stays nonempty.
    ``exact`` is True when the two bounds coincide everywhere.
    """
    dg = case.dgs
    p_sl = ts.p_sl
    if len(dg) == 0:
        z = np.zeros(0)
        return BetaBounds(z, z, True)
    r_max = 0.0
    if len(case.gens):
        r_max = float(max(case.gens.r_plus.max(), case.gens.r_minus.max()))
    lower = np.maximum(0.0, p_sl[None, :] - dg.f_plus[:, None])
    upper = np.maximum(r_max, p_sl)[None, :] - np.minimum(dg.f_plus, dg.f_minus)[:, None]
    upper = np.maximum(upper, lower)
    exact = bool(np.allclose(lower, upper, rtol=0.0, atol=1e-12))
    return BetaBounds(lower.ravel(), upper.ravel(), exact)


def build_omega_power(case: GridCase, ts: TimeSeries, R, fcast=None) -> OmegaStandard:
    """Box ``p_min <= h <= p_plus`` plus ``sum_i h[i,t] >= R * sum_i forecast[i,t]``.

    The envelope box is the device box for every ``R``, so the sets nest as R grows.
    """
    if not 0.0 <= float(R) <= 1.0:
        raise ValueError("R must lie in [0, 1]")
    T = ts.periods
    dg = case.dgs
    nd = len(dg)
    fc = forecast(case, ts) if fcast is None else np.asarray(fcast, dtype=float).reshape(nd, T)
    n = nd * T
    lo = np.repeat(dg.p_min, T) if nd else np.zeros(0)
    up = np.repeat(dg.p_plus, T) if nd else np.zeros(0)
    if np.any(lo > up):
        raise EmptyOmega("renewable p_min exceeds p_plus")
    need = float(R) * fc.sum(axis=0)
    cap = up.reshape(nd, T).sum(axis=0) if nd else np.zeros(T)
    if np.any(need > cap + 1e-12):
        t = int(np.flatnonzero(need > cap + 1e-12)[0])
        raise EmptyOmega(f"period {t}: R * forecast {need[t]:.6g} exceeds capacity {cap[t]:.6g}")
    eye = sp.identity(n, format="csr")
    # aggregate rows: -sum_i h[i,t] <= -R sum_i forecast[i,t]
    agg = sp.csr_matrix((-np.ones(n), (np.tile(np.arange(T), nd), np.arange(n))), shape=(T, n))
    a = sp.vstack([eye, agg], format="csr")
    b = np.concatenate([up, -need])
    return OmegaStandard(a, b, np.ones(n + T, dtype=bool), lo, up)


class _Rows:
    """Triplet accumulator for named constraint rows."""

    def __init__(self, ncol):
        self.ncol = ncol
        self.r, self.c, self.v = [], [], []
        self.senses, self.rhs, self.names = [], [], []

    def add(self, cols, vals, sense, rhs, name):
        i = len(self.rhs)
        cols = np.atleast_1d(cols)
        self.r.append(np.full(cols.size, i))
        self.c.append(cols)
        self.v.append(np.broadcast_to(np.asarray(vals, dtype=float), cols.shape))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.names.append(name)

    def matrix(self):
        if not self.rhs:
            return sp.csr_matrix((0, self.ncol))
        return sp.csr_matrix((np.concatenate(self.v), (np.concatenate(self.r),
                                                       np.concatenate(self.c))),
                             shape=(len(self.rhs), self.ncol))


def build_power_instance(case: GridCase, ts: TimeSeries, params: PowerBuildParams | None = None,
                         beta: BetaBounds | None = None, return_layout=False):
    """Assemble the trilevel instance of the scheduling problem.

    Coupled rows come in three groups: renewable availability
    ``-P_DG[i,t] >= -h[i,t]`` (the only rows with ``B_h`` entries), the
    regulation link ``P_G_reg = P_G + P_G_up + P_G_dn`` and the intra-day
    clearing row, the latter two as pairs of ``>=`` rows with ``B_x`` entries
    and unrestricted beta upper bounds.

    Returns
    -------
    WcaroInstance, or ``(WcaroInstance, PowerLayout)`` with ``return_layout``.
    """
    params = params or PowerBuildParams()
    T = ts.periods
    dt = ts.dt
    gens, dgs, st, lines = case.gens, case.dgs, case.storages, case.lines
    nG, nD, nS, nL, nB = len(gens), len(dgs), len(st), len(lines), case.n_bus
    signed = params.penalty_convention == "signed"
    if signed and np.any(dgs.f_minus > dgs.f_plus):
        # up = a, dn = -a would lower the cost without limit
        raise ValueError("signed penalties need f_minus <= f_plus on every renewable unit")

    sizes = {"P_G_reg": nG, "P_G_up": nG, "P_G_dn": nG, "P_DG": nD, "P_DG_up": nD,
             "P_DG_dn": nD, "P_sl": 1, "P_ch": nS, "P_dch": nS, "p_line": nL, "theta": nB,
             "soc": nS, "mu_ch": nS, "mu_dch": nS}
    yb, pos = {}, 0
    for name in _Y_BLOCKS:
        yb[name] = (pos, sizes[name])
        pos += sizes[name] * T
    ny = pos
    n_bin = 2 * nS * T
    xb = {"P_G": (0, nG), "P_fl": (nG * T, 1)}
    nx = nG * T + T

    def y(name, d, t):
        start, count = yb[name]
        return start + np.asarray(d) * T + t

    fc = forecast(case, ts)
    pd = demand(case, ts)

    # objective on y
    c = np.zeros(ny)
    sgn = 1.0 if signed else -1.0
    for t in range(T):
        if nG:
            c[y("P_G_up", np.arange(nG), t)] = gens.r_plus
            c[y("P_G_dn", np.arange(nG), t)] = sgn * gens.r_minus
        if nD:
            c[y("P_DG_up", np.arange(nD), t)] = dgs.f_plus
            c[y("P_DG_dn", np.arange(nD), t)] = sgn * dgs.f_minus
        c[y("P_sl", 0, t)] = ts.p_sl[t]

    rows = _Rows(ny)
    ge, eq = SENSE_GE, SENSE_EQ
    soc0 = _soc_initial(st, params.soc_initial)
    bus_of = {int(b): k for k, b in enumerate(case.bus_ids)}
    root = bus_of[int(case.root)]
    gen_bus = np.asarray([bus_of[int(b)] for b in gens.bus], dtype=int) if nG else []
    dg_bus = np.asarray([bus_of[int(b)] for b in dgs.bus], dtype=int) if nD else []
    st_bus = np.asarray([bus_of[int(b)] for b in st.bus], dtype=int) if nS else []
    if nL:
        f_bus = np.asarray([bus_of[int(b)] for b in lines.columns["from"]], dtype=int)
        t_bus = np.asarray([bus_of[int(b)] for b in lines.to], dtype=int)
    for t in range(T):
        for g in range(nG):
            k = y("P_G_reg", g, t)
            rows.add(k, 1.0, ge, gens.p_min[g], f"preg_lo[{g},{t}]")
            rows.add(k, -1.0, ge, -gens.p_max[g], f"preg_hi[{g},{t}]")
            k = y("P_G_up", g, t)
            rows.add(k, 1.0, ge, 0.0, f"up_lo[{g},{t}]")
            rows.add(k, -1.0, ge, -gens.reg_up[g], f"up_hi[{g},{t}]")
            k = y("P_G_dn", g, t)
            rows.add(k, -1.0, ge, 0.0, f"dn_hi[{g},{t}]")
            rows.add(k, 1.0, ge, gens.reg_down[g], f"dn_lo[{g},{t}]")
        for i in range(nD):
            rows.add(y("P_DG", i, t), 1.0, ge, dgs.p_min[i], f"dg_lo[{i},{t}]")
            rows.add([y("P_DG", i, t), y("P_DG_up", i, t), y("P_DG_dn", i, t)],
                     [1.0, -1.0, -1.0], eq, fc[i, t], f"dg_dev[{i},{t}]")
            rows.add(y("P_DG_up", i, t), 1.0, ge, 0.0, f"dgup_lo[{i},{t}]")
            rows.add(y("P_DG_dn", i, t), -1.0, ge, 0.0, f"dgdn_hi[{i},{t}]")
        for s in range(nS):
            ch, dch = y("P_ch", s, t), y("P_dch", s, t)
            mc, md = y("mu_ch", s, t), y("mu_dch", s, t)
            rows.add([ch, mc], [1.0, -st.p_ch_min[s]], ge, 0.0, f"ch_lo[{s},{t}]")
            rows.add([ch, mc], [-1.0, st.p_ch_max[s]], ge, 0.0, f"ch_hi[{s},{t}]")
            rows.add([dch, md], [1.0, -st.p_dch_min[s]], ge, 0.0, f"dch_lo[{s},{t}]")
            rows.add([dch, md], [-1.0, st.p_dch_max[s]], ge, 0.0, f"dch_hi[{s},{t}]")
            rows.add([mc, md], [-1.0, -1.0], ge, -1.0, f"mu_excl[{s},{t}]")
            k = y("soc", s, t)
            rows.add(k, 1.0, ge, st.soc_min[s], f"soc_lo[{s},{t}]")
            rows.add(k, -1.0, ge, -st.soc_max[s], f"soc_hi[{s},{t}]")
            rate = dt / st.capacity[s]
            if t == 0:
                rows.add([k, ch, dch], [1.0, -rate, rate], eq, soc0[s], f"soc_dyn[{s},{t}]")
            else:
                rows.add([k, y("soc", s, t - 1), ch, dch], [1.0, -1.0, -rate, rate], eq, 0.0,
                         f"soc_dyn[{s},{t}]")
            if params.terminal_soc and t == T - 1:
                rows.add(k, 1.0, ge, soc0[s], f"soc_end[{s}]")
        for ln in range(nL):
            k = y("p_line", ln, t)
            inv = 1.0 / lines.x[ln]
            rows.add([k, y("theta", f_bus[ln], t), y("theta", t_bus[ln], t)], [1.0, -inv, inv],
                     eq, 0.0, f"flow[{ln},{t}]")
            if np.isfinite(lines.s_max[ln]):
                rows.add(k, 1.0, ge, -lines.s_max[ln], f"therm_lo[{ln},{t}]")
                rows.add(k, -1.0, ge, -lines.s_max[ln], f"therm_hi[{ln},{t}]")
        rows.add(y("theta", root, t), 1.0, eq, 0.0, f"theta_ref[{t}]")
        for n in range(nB):
            cols, vals = [], []
            for g in np.flatnonzero(np.asarray(gen_bus) == n):
                cols.append(y("P_G_reg", g, t))
                vals.append(1.0)
            for i in np.flatnonzero(np.asarray(dg_bus) == n):
                cols.append(y("P_DG", i, t))
                vals.append(1.0)
            for s in np.flatnonzero(np.asarray(st_bus) == n):
                cols += [y("P_dch", s, t), y("P_ch", s, t)]
                vals += [1.0, -1.0]
            if nL:
                for ln in np.flatnonzero(f_bus == n):
                    cols.append(y("p_line", ln, t))
                    vals.append(-1.0)
                for ln in np.flatnonzero(t_bus == n):
                    cols.append(y("p_line", ln, t))
                    vals.append(1.0)
            if n == root:
                cols.append(y("P_sl", 0, t))
                vals.append(1.0)
            rows.add(np.asarray(cols, dtype=int), vals, eq, pd[n, t], f"balance[{n},{t}]")
    a_free = rows.matrix()

    # coupled rows
    nh = nD * T
    cr = _Rows(ny)
    bx_r, bx_c, bx_v = [], [], []
    bh_r, bh_c = [], []
    for i in range(nD):
        for t in range(T):
            j = len(cr.rhs)
            cr.add(y("P_DG", i, t), -1.0, ge, 0.0, f"dg_avail[{i},{t}]")
            bh_r.append(j)
            bh_c.append(i * T + t)
    n_dg_rows = len(cr.rhs)
    for t in range(T):
        for g in range(nG):
            cols = [y("P_G_reg", g, t), y("P_G_up", g, t), y("P_G_dn", g, t)]
            for sign in (1.0, -1.0):
                j = len(cr.rhs)
                cr.add(cols, [sign, -sign, -sign], ge, 0.0,
                       f"reg_link{'+' if sign > 0 else '-'}[{g},{t}]")
                bx_r.append(j)
                bx_c.append(g * T + t)
                bx_v.append(sign)
        cols = [y("P_sl", 0, t)]
        vals = [1.0]
        for g in range(nG):
            cols += [y("P_G_up", g, t), y("P_G_dn", g, t)]
            vals += [1.0, 1.0]
        for i in range(nD):
            cols += [y("P_DG_up", i, t), y("P_DG_dn", i, t)]
            vals += [1.0, 1.0]
        for s in range(nS):
            cols += [y("P_dch", s, t), y("P_ch", s, t)]
            vals += [1.0, -1.0]
        for sign in (1.0, -1.0):
            j = len(cr.rhs)
            cr.add(np.asarray(cols, dtype=int), sign * np.asarray(vals), ge, 0.0,
                   f"intraday{'+' if sign > 0 else '-'}[{t}]")
            bx_r.append(j)
            bx_c.append(nG * T + t)
            bx_v.append(sign)
    nj = len(cr.rhs)
    b_coupled = cr.matrix()
    b_x = sp.csr_matrix((bx_v, (bx_r, bx_c)), shape=(nj, nx))
    b_h = sp.csr_matrix((-np.ones(len(bh_r)), (bh_r, bh_c)), shape=(nj, nh))

    if beta is None:
        beta = beta_bounds_power(case, ts)
    beta_lower = np.concatenate([beta.lower, np.zeros(nj - n_dg_rows)])
    beta_upper = np.concatenate([beta.upper, np.full(nj - n_dg_rows, np.inf)])

    third = ThirdLevel.build(ny - n_bin, n_bin, c, a_free, rows.rhs, b_coupled, b_x, b_h,
                             np.zeros(nj), beta_lower, beta_upper, rows.senses, n_x=nx, n_h=nh)
    first = _first_level(case, ts, fc, pd)
    omega = build_omega_power(case, ts, params.R, fc)
    inst = WcaroInstance(first, omega, third, f"{case.name}-T{T}-R{float(params.R):g}")
    if return_layout:
        bal = np.asarray([k for k, n in enumerate(rows.names) if n.startswith("balance[")])
        return inst, PowerLayout(T, xb, yb, n_dg_rows, bal, tuple(rows.names),
                                 tuple(cr.names))
    return inst


def _soc_initial(st, soc_initial):
    if len(st) == 0:
        return np.zeros(0)
    if soc_initial is None:
        return 0.5 * (st.soc_min + st.soc_max)
    v = np.broadcast_to(np.asarray(soc_initial, dtype=float), (len(st),)).copy()
    if np.any(v < st.soc_min) or np.any(v > st.soc_max):
        raise ValueError("initial state of charge outside [soc_min, soc_max]")
    return v


def _first_level(case, ts, fc, pd):
    """Market clearing ``sum_g P_G[g,t] + P_fl[t] = demand - forecast`` and unit limits."""
    T = ts.periods
    gens = case.gens
    nG = len(gens)
    nx = nG * T + T
    r = np.concatenate([np.tile(np.arange(T), nG), np.arange(T)])
    cidx = np.arange(nx)
    a = sp.csr_matrix((np.ones(nx), (r, cidx)), shape=(T, nx))
    rhs = pd.sum(axis=0) - fc.sum(axis=0)
    lower = np.full(nx, -np.inf)
    upper = np.full(nx, np.inf)
    lin = np.zeros(nx)
    quad = np.zeros(nx)
    const = 0.0
    if nG:
        lower[:nG * T] = np.repeat(gens.p_min, T)
        upper[:nG * T] = np.repeat(gens.p_max, T)
        lin[:nG * T] = np.repeat(gens.c1, T)
        quad[:nG * T] = np.repeat(gens.c2, T)
        const = float(gens.c0.sum()) * T
    lin[nG * T:] = ts.p_fl - ts.p_sl
    feas = Polytope.build(a, np.full(T, SENSE_EQ), rhs, lower, upper, dim=nx)
    fl = FirstLevel.build(feas, lin, quad, const)
    _check_first_level(fl)
    return fl


def _check_first_level(fl):
    from ..simplex import INFEASIBLE, solve_lp

    if solve_lp(fl.feasible_set.as_lp()).status == INFEASIBLE:
        raise InfeasibleFirstLevel("the first-level constraints admit no dispatch")


def power_solution_report(case: GridCase, layout: PowerLayout, inst, y):
    """Residual checks at a recourse vector ``y``.

    Returns a dict with the worst nodal-balance residual, the worst violation of
    ``mu_ch + mu_dch <= 1`` and of the charge/discharge gating bounds, and
    whether the indicators are integral.
    """
    y = np.asarray(y, dtype=float)
    tl = inst.third
    act = tl.a_free @ y
    bal = layout.balance_rows
    out = {"balance_residual": float(np.max(np.abs(act[bal] - tl.b_free[bal]), initial=0.0))}
    mc = layout.take(y, "mu_ch")
    md = layout.take(y, "mu_dch")
    out["mu_excess"] = float(np.max(mc + md - 1.0, initial=0.0))
    out["mu_integral"] = bool(np.all(np.abs(mc - np.round(mc)) <= 1e-6)
                              and np.all(np.abs(md - np.round(md)) <= 1e-6))
    st = case.storages
    gate = 0.0
    if len(st):
        ch, dch = layout.take(y, "P_ch"), layout.take(y, "P_dch")
        gate = max(np.max(st.p_ch_min[:, None] * mc - ch), np.max(ch - st.p_ch_max[:, None] * mc),
                   np.max(st.p_dch_min[:, None] * md - dch),
                   np.max(dch - st.p_dch_max[:, None] * md))
    out["gate_violation"] = float(max(gate, 0.0))
    return out
