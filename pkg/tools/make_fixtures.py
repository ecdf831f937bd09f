"""Regenerate the bundled grid replicas and synthetic day series.

Development helper, not part of the installed package. The case5 data is the
public PJM 5-bus system and is written out directly; the larger topologies are
read through pandapower (``pip install pandapower``) and reduced to the bus,
branch and generator columns the parser needs.

    python tools/make_fixtures.py [--out src/wcaro/powergrid/data]
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

HOURLY_P_FL = [28, 26, 25, 24, 24, 26, 30, 35, 38, 36, 34, 33, 32, 32, 33, 35, 40, 46, 48, 44,
               40, 36, 32, 30]
HOURLY_SPREAD = [3, 3, 3, 3, 3, 4, 4, 5, 5, 4, 4, 4, 4, 4, 4, 4, 5, 6, 6, 5, 5, 4, 4, 3]
HOURLY_DELTA_D = [0.75, 0.72, 0.70, 0.70, 0.72, 0.78, 0.88, 0.97, 1.02, 1.04, 1.05, 1.05, 1.04,
                  1.03, 1.03, 1.05, 1.10, 1.15, 1.15, 1.10, 1.02, 0.94, 0.86, 0.80]
HOURLY_SOLAR = [0, 0, 0, 0, 0, 0.05, 0.25, 0.55, 0.9, 1.2, 1.45, 1.6, 1.6, 1.5, 1.3, 1.0, 0.65,
                0.3, 0.08, 0, 0, 0, 0, 0]

CASE5_M = """function mpc = case5
%% PJM 5-bus system, replica for the robust scheduling examples
%% ratings of lines 1-2 and 4-5 raised by 25% so that every renewable outcome is servable
mpc.version = '2';
mpc.baseMVA = 100;

%% bus data
%	bus_i	type	Pd	Qd	Gs	Bs	area	Vm	Va	baseKV	zone	Vmax	Vmin
mpc.bus = [
	1	2	0	0	0	0	1	1	0	230	1	1.1	0.9;
	2	1	300	98.61	0	0	1	1	0	230	1	1.1	0.9;
	3	2	300	98.61	0	0	1	1	0	230	1	1.1	0.9;
	4	3	400	131.47	0	0	1	1	0	230	1	1.1	0.9;
	5	2	0	0	0	0	1	1	0	230	1	1.1	0.9;
];

%% generator data
%	bus	Pg	Qg	Qmax	Qmin	Vg	mBase	status	Pmax	Pmin
mpc.gen = [
	1	40	0	30	-30	1	100	1	40	0;
	1	170	0	127.5	-127.5	1	100	1	170	0;
	3	323.49	0	390	-390	1	100	1	520	0;
	4	0	0	150	-150	1	100	1	200	0;
	5	466.51	0	450	-450	1	100	1	600	0;
];

%% branch data
%	fbus	tbus	r	x	b	rateA	rateB	rateC	ratio	angle	status	angmin	angmax
mpc.branch = [
	1	2	0.00281	0.0281	0.00712	500	500	500	0	0	1	-360	360;
	1	4	0.00304	0.0304	0.00658	0	0	0	0	0	1	-360	360;
	1	5	0.00064	0.0064	0.03126	0	0	0	0	0	1	-360	360;
	2	3	0.00108	0.0108	0.01852	0	0	0	0	0	1	-360	360;
	3	4	0.00297	0.0297	0.00674	0	0	0	0	0	1	-360	360;
	4	5	0.00297	0.0297	0.00674	300	300	300	0	0	1	-360	360;
];

%% generator cost data
%	2	startup	shutdown	n	c(n-1)	...	c0
mpc.gencost = [
	2	0	0	3	0	14	0;
	2	0	0	3	0	15	0;
	2	0	0	3	0	30	0;
	2	0	0	3	0	40	0;
	2	0	0	3	0	10	0;
];
"""

CASE5_ROLES = {
    "root": 1,
    "unit": "$ p.u.",
    "generators": [
        {"row": 1, "role": "conventional", "r_plus": 14},
        {"row": 2, "role": "renewable"},
        {"row": 3, "role": "storage"},
        {"row": 4, "role": "conventional", "r_plus": 20},
        {"row": 5, "role": "renewable"},
    ],
}

# role plans for the pandapower-derived replicas: conventional count, renewables, storages
PLANS = {
    "case118": {"source": "case118", "conventional": 10, "renewable": 6, "storage": 6},
    "case200": {"source": "case_illinois200", "conventional": 12, "renewable": 10, "storage": 10},
    "case300": {"source": "case300", "conventional": 15, "renewable": 15, "storage": 15},
}


def write_series(out: Path):
    p_fl = np.asarray(HOURLY_P_FL, dtype=float)
    p_sl = p_fl + np.asarray(HOURLY_SPREAD, dtype=float)
    dd = np.asarray(HOURLY_DELTA_D)
    dg = 0.3 + np.asarray(HOURLY_SOLAR)
    for periods, name in ((24, "day24.csv"), (96, "day96.csv")):
        if periods == 24:
            cols = (p_fl, p_sl, dd, dg)
        else:
            grid = np.arange(96) / 4.0
            hours = np.arange(25)
            cols = tuple(np.interp(grid, hours, np.append(v, v[0])) for v in (p_fl, p_sl, dd, dg))
        lines = ["t,p_fl,p_sl,delta_d,delta_dg"]
        for t in range(periods):
            lines.append(f"{t}," + ",".join(f"{v[t]:.4f}" for v in cols))
        (out / name).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _fmt_row(vals):
    return "\t" + "\t".join(f"{v:.6g}" for v in vals) + ";"


def matpower_text(name, base, bus, gen, branch, gencost):
    out = [f"function mpc = {name}", f"%% replica of the {name} topology", "mpc.version = '2';",
           f"mpc.baseMVA = {base:g};", "", "mpc.bus = ["]
    out += [_fmt_row(r) for r in bus] + ["];", "", "mpc.gen = ["]
    out += [_fmt_row(r) for r in gen] + ["];", "", "mpc.branch = ["]
    out += [_fmt_row(r) for r in branch] + ["];", "", "mpc.gencost = ["]
    out += [_fmt_row(r) for r in gencost] + ["];", ""]
    return "\n".join(out)


def _ppc(source):
    import pandapower as pp
    import pandapower.networks as pn

    net = getattr(pn, source)()
    pp.rundcpp(net)
    return net._ppc


def _reduce(ppc):
    """Bus/branch arrays of the component containing the reference bus, 1-based ids."""
    bus = ppc["bus"].copy()
    br = ppc["branch"]
    br = br[np.real(br[:, 10]) > 0]
    f = np.real(br[:, 0]).astype(int)
    t = np.real(br[:, 1]).astype(int)
    n = bus.shape[0]
    g = csr_matrix((np.ones(f.size), (f, t)), shape=(n, n))
    _, comp = connected_components(g, directed=False)
    ref = int(np.flatnonzero(bus[:, 1] == 3)[0])
    keep = np.flatnonzero(comp == comp[ref])
    new_id = -np.ones(n, dtype=int)
    new_id[keep] = np.arange(1, keep.size + 1)
    ok = (new_id[f] > 0) & (new_id[t] > 0) & (f != t)
    x = np.abs(np.real(br[ok, 3]))
    x = np.maximum(x, 1e-3)  # non-positive or tiny reactances become small positive ones
    branch = np.zeros((int(ok.sum()), 13))
    branch[:, 0] = new_id[f[ok]]
    branch[:, 1] = new_id[t[ok]]
    branch[:, 3] = np.round(x, 6)
    branch[:, 10] = 1
    branch[:, 11], branch[:, 12] = -360, 360
    b = np.zeros((keep.size, 13))
    b[:, 0] = np.arange(1, keep.size + 1)
    b[:, 1] = np.where(np.arange(keep.size) == int(np.flatnonzero(keep == ref)[0]), 3, 1)
    b[:, 2] = np.round(np.maximum(np.real(bus[keep, 2]), 0.0), 3)
    b[:, 7], b[:, 9], b[:, 11], b[:, 12] = 1, 100, 1.1, 0.9
    gen = np.real(ppc["gen"])
    gb = gen[:, 0].astype(int)
    gkeep = new_id[gb] > 0
    return b, branch, gen[gkeep], new_id[gb[gkeep]], int(new_id[ref])


def write_derived_case(out: Path, name, plan, rng):
    ppc = _ppc(plan["source"])
    bus, branch, gen_src, gen_bus, root = _reduce(ppc)
    nb = bus.shape[0]
    total = bus[:, 2].sum()
    # conventional units at the largest generator buses, sized to cover part of the load
    order = np.argsort(-np.minimum(gen_src[:, 8], 1e4), kind="stable")
    conv_bus = []
    for k in order:
        b = int(gen_bus[k])
        if b not in conv_bus:
            conv_bus.append(b)
        if len(conv_bus) == plan["conventional"]:
            break
    others = [b for b in range(1, nb + 1) if b not in conv_bus]
    dg_bus = sorted(rng.choice(others, plan["renewable"], replace=False).tolist())
    st_bus = sorted(rng.choice(range(1, nb + 1), plan["storage"], replace=False).tolist())
    share = 0.5 * total / len(conv_bus)
    gen_rows, cost_rows, roles = [], [], []
    for k, b in enumerate(conv_bus):
        pmax = round(share * rng.uniform(0.8, 1.2), 1)
        gen_rows.append([b, 0, 0, 0, 0, 1, 100, 1, pmax, 0])
        cost_rows.append([2, 0, 0, 3, 0, round(float(rng.uniform(10, 20)), 2), 0])
        roles.append({"row": k + 1, "role": "conventional"})
    for b in dg_bus:
        pmax = round(0.15 * total / len(dg_bus) * rng.uniform(0.8, 1.2), 1)
        gen_rows.append([b, 0, 0, 0, 0, 1, 100, 1, pmax, 0])
        cost_rows.append([2, 0, 0, 3, 0, 0, 0])
        roles.append({"row": len(gen_rows), "role": "renewable"})
    text = matpower_text(name, 100.0, bus, gen_rows, branch, cost_rows)
    (out / f"{name}.m").write_text(text, encoding="utf-8")
    sidecar = {"root": root, "unit": "$ p.u.", "generators": roles,
               "storages": [{"bus": b} for b in st_bus]}
    (out / f"{name}.roles.json").write_text(json.dumps(sidecar, indent=1) + "\n",
                                            encoding="utf-8")


def write_case30(out: Path):
    ppc = _ppc("case_ieee30")
    bus, branch, gen_src, gen_bus, root = _reduce(ppc)
    # IEEE 30-bus generators sit at buses 1, 2, 5, 8, 11, 13
    spec = [(1, 100.0, "storage", 0.0), (2, 140.0, "renewable", 0.0), (5, 100.0, "conventional", 12),
            (8, 100.0, "conventional", 16), (11, 100.0, "conventional", 18),
            (13, 100.0, "conventional", 14)]
    c2 = {5: 2.0, 8: 1.5, 11: 2.5, 13: 1.0}
    gen_rows, cost_rows, roles = [], [], []
    for k, (b, pmax, role, c1) in enumerate(spec):
        gen_rows.append([b, 0, 0, 0, 0, 1, 100, 1, pmax, 0])
        cost_rows.append([2, 0, 0, 3, c2.get(b, 0.0), c1, 0])
        roles.append({"row": k + 1, "role": role})
    text = matpower_text("case30", 100.0, bus, gen_rows, branch, cost_rows)
    (out / "case30.m").write_text(text, encoding="utf-8")
    sidecar = {"root": root, "unit": "$ p.u.", "generators": roles,
               "storages": [{"bus": 2}, {"bus": 8}, {"bus": 13}]}
    (out / "case30.roles.json").write_text(json.dumps(sidecar, indent=1) + "\n", encoding="utf-8")


def write_suites(out: Path):
    small = {"cases": [
        {"name": "case5", "case": "case5.json", "timeseries": "day24.csv", "R": 1.0},
        {"name": "case30", "case": "case30.m", "timeseries": "day24.csv", "R": 1.0,
         "storage_subset": [1, 2]},
    ]}
    medium = {"cases": small["cases"] + [
        {"name": "case118", "case": "case118.m", "timeseries": "day24.csv", "R": 1.0,
         "gap": 1e-4},
    ]}
    large = {"cases": medium["cases"] + [
        {"name": "case200", "case": "case200.m", "timeseries": "day24.csv", "R": 1.0,
         "gap": 1e-4},
        {"name": "case300", "case": "case300.m", "timeseries": "day24.csv", "R": 1.0,
         "gap": 1e-4},
    ]}
    for name, suite in (("suite_small.json", small), ("suite.json", medium),
                        ("suite_large.json", large)):
        (out / name).write_text(json.dumps(suite, indent=1) + "\n", encoding="utf-8")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="src/wcaro/powergrid/data")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_series(out)
    (out / "case5.m").write_text(CASE5_M, encoding="utf-8")
    (out / "case5.roles.json").write_text(json.dumps(CASE5_ROLES, indent=1) + "\n",
                                          encoding="utf-8")
    import sys
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
    from wcaro.powergrid.case import parse_case

    case5 = parse_case(out / "case5.m")
    (out / "case5.json").write_text(json.dumps(case5.to_dict(), indent=1) + "\n",
                                    encoding="utf-8")
    r40 = case5.with_gen_prices(4, 40.0).to_dict()
    r40["name"] = "case5_r40"
    (out / "case5_r40.json").write_text(json.dumps(r40, indent=1) + "\n", encoding="utf-8")
    write_case30(out)
    rng = np.random.default_rng(args.seed)
    for name, plan in PLANS.items():
        write_derived_case(out, name, plan, rng)
    write_suites(out)


if __name__ == "__main__":
    main()
