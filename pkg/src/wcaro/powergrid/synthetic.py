"""Small random grids and day series for property tests."""
from __future__ import annotations

import numpy as np

from .case import DeviceTable, GridCase
from .timeseries import TimeSeries


def random_grid_case(seed, max_bus=6, congested=False, storage=True,
                     signed=False) -> GridCase:
    """A connected random grid with a handful of devices.

    Lines are unconstrained unless ``congested``. With ``signed`` the
    renewable penalties satisfy ``f_minus <= f_plus`` so that the signed
    convention keeps the recourse bounded. Storage charge and discharge
    minima are zero so that every indicator assignment is operable.
    """
    rng = np.random.default_rng(seed)
    nb = int(rng.integers(3, max_bus + 1))
    ids = np.arange(1, nb + 1)
    edges = [(int(rng.integers(1, k + 1)), k + 1) for k in range(1, nb)]  # spanning tree
    for _ in range(int(rng.integers(0, 3))):
        a, b = sorted(rng.choice(ids, 2, replace=False).tolist())
        edges.append((a, b))
    nl = len(edges)
    s_max = rng.uniform(0.5, 2.0, nl) if congested else np.full(nl, np.inf)
    lines = DeviceTable({"from": np.asarray([e[0] for e in edges]),
                         "to": np.asarray([e[1] for e in edges]),
                         "x": rng.uniform(0.01, 0.2, nl), "s_max": s_max})
    ng = int(rng.integers(1, 3))
    p_max = rng.uniform(0.5, 2.0, ng)
    c1 = rng.uniform(8.0, 20.0, ng)
    r = rng.uniform(5.0, 20.0, ng)
    gens = DeviceTable({"bus": rng.choice(ids, ng), "p_min": np.zeros(ng), "p_max": p_max,
                        "c2": rng.choice([0.0, 1.0], ng), "c1": c1, "c0": np.zeros(ng),
                        "reg_up": 0.5 * p_max, "reg_down": -0.5 * p_max, "r_plus": r,
                        "r_minus": r * rng.uniform(0.8, 1.2, ng)})
    nd = int(rng.integers(1, 3))
    f_plus = rng.uniform(1.0, 4.0, nd)
    f_minus = f_plus * rng.uniform(0.5, 1.0, nd) if signed else f_plus + rng.uniform(0.0, 2.0, nd)
    dgs = DeviceTable({"bus": rng.choice(ids, nd), "p_min": np.zeros(nd),
                       "p_plus": rng.uniform(0.5, 2.0, nd), "f_plus": f_plus,
                       "f_minus": f_minus})
    ns = int(rng.integers(0, 2)) if storage else 0
    st = DeviceTable({"bus": rng.choice(ids, ns), "soc_min": np.full(ns, 0.1),
                      "soc_max": np.full(ns, 0.9), "capacity": rng.uniform(1.0, 3.0, ns),
                      "p_ch_min": np.zeros(ns), "p_ch_max": rng.uniform(0.2, 0.6, ns),
                      "p_dch_min": np.zeros(ns), "p_dch_max": rng.uniform(0.2, 0.6, ns)})
    demand = np.round(rng.uniform(0.0, 1.5, nb), 3)
    return GridCase(f"rand{seed}", 100.0, "$ p.u.", 1, ids, demand, lines, gens, dgs, st)


def random_series(seed, periods=3, constant_p_sl=False) -> TimeSeries:
    rng = np.random.default_rng(seed)
    p_sl = np.full(periods, rng.uniform(22.0, 40.0)) if constant_p_sl \
        else rng.uniform(22.0, 40.0, periods)
    p_fl = p_sl - rng.uniform(1.0, 5.0, periods)
    return TimeSeries.build(p_fl, p_sl, rng.uniform(0.7, 1.2, periods),
                            rng.uniform(0.2, 1.6, periods))
