"""Shared generators for the test suite."""
import numpy as np
import scipy.sparse as sp

from wcaro.lpmodel import LpModel


def random_lp(seed, max_n=12, max_m=10):
    """Feasible, bounded random LP in mixed row and bound form.

    Feasibility comes from building rows around a known point; boundedness
    from finite boxes on every column.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    a = rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.6)
    x0 = rng.uniform(-1, 1, n)
    act = a @ x0
    senses = rng.choice([">", "<", "="], m, p=[0.45, 0.45, 0.1])
    rhs = np.where(senses == ">", act - rng.uniform(0, 1, m),
                   np.where(senses == "<", act + rng.uniform(0, 1, m), act))
    lower = x0 - rng.uniform(0.5, 3, n)
    upper = x0 + rng.uniform(0.5, 3, n)
    free = rng.random(n) < 0.15
    lower[free] = -np.inf
    upper[free] = np.inf
    # free columns could make the LP unbounded; box them through rows instead
    rows = [a]
    rs, rr = list(senses), list(rhs)
    for j in np.flatnonzero(free):
        e = np.zeros(n)
        e[j] = 1.0
        rows += [e[None], e[None]]
        rs += [">", "<"]
        rr += [x0[j] - 2.0, x0[j] + 2.0]
    return LpModel.build(rng.normal(size=n), np.vstack(rows), rs, rr, lower, upper,
                         sense=str(rng.choice(["min", "max"])),
                         obj_const=float(rng.normal()))


def to_linprog(m: LpModel):
    """Keyword arguments for :func:`scipy.optimize.linprog` (minimization form)."""
    sign = -1.0 if m.sense == "max" else 1.0
    a = sp.csr_matrix(m.a_mat)
    ge, le, eq = m.senses == ">", m.senses == "<", m.senses == "="
    a_ub = sp.vstack([a[le], -a[ge]])
    b_ub = np.concatenate([m.rhs[le], -m.rhs[ge]])
    kw = {"c": sign * m.obj, "bounds": list(zip(m.lower, m.upper))}
    if a_ub.shape[0]:
        kw.update(A_ub=a_ub, b_ub=b_ub)
    if eq.any():
        kw.update(A_eq=a[eq], b_eq=m.rhs[eq])
    return kw


def linprog_value(m: LpModel):
    from scipy.optimize import linprog

    res = linprog(**to_linprog(m), method="highs")
    sign = -1.0 if m.sense == "max" else 1.0
    if res.status == 2:
        return np.inf * sign
    if res.status == 3:
        return -np.inf * sign
    return sign * res.fun + m.obj_const
