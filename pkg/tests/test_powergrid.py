import json

import numpy as np
import pytest

from wcaro.branch_bound import solve_mip
from wcaro.exceptions import EmptyOmega, LengthMismatch, NegativeMultiplier, ParseError, UnknownRole
from wcaro.model import validate_instance
from wcaro.oracle import enumerate_vertices
from wcaro.powergrid import (PowerBuildParams, beta_bounds_power, build_omega_power,
                             build_power_instance, data_path, forecast, load_timeseries,
                             parse_case, power_solution_report)
from wcaro.powergrid.case import DeviceTable, GridCase, case_from_dict
from wcaro.powergrid.synthetic import random_grid_case, random_series
from wcaro.powergrid.timeseries import TimeSeries
from wcaro.reformulate import build_single_level, build_third_level_primal, dualize_lp
from wcaro.simplex import solve_lp

INF = np.inf


def tiny_case(f_plus=(2.0,), f_minus=(3.0,), r=14.0, p_plus=(5.0,), p_min=None,
              storages=False):
    nd = len(f_plus)
    gens = DeviceTable({"bus": np.array([1]), "p_min": np.zeros(1), "p_max": np.array([3.0]),
                        "c2": np.zeros(1), "c1": np.array([10.0]), "c0": np.zeros(1),
                        "reg_up": np.array([1.0]), "reg_down": np.array([-1.0]),
                        "r_plus": np.array([r]), "r_minus": np.array([r])})
    dgs = DeviceTable({"bus": np.full(nd, 2), "p_min": np.zeros(nd) if p_min is None
                       else np.asarray(p_min, float), "p_plus": np.asarray(p_plus, float),
                       "f_plus": np.asarray(f_plus, float), "f_minus": np.asarray(f_minus, float)})
    ns = 1 if storages else 0
    st = DeviceTable({"bus": np.full(ns, 2), "soc_min": np.full(ns, 0.1),
                      "soc_max": np.full(ns, 0.9), "capacity": np.full(ns, 2.0),
                      "p_ch_min": np.zeros(ns), "p_ch_max": np.full(ns, 0.5),
                      "p_dch_min": np.zeros(ns), "p_dch_max": np.full(ns, 0.5)})
    lines = DeviceTable({"from": np.array([1]), "to": np.array([2]), "x": np.array([0.1]),
                         "s_max": np.array([INF])})
    return GridCase("tiny", 100.0, "$ p.u.", 1, np.array([1, 2]), np.array([0.5, 1.0]),
                    lines, gens, dgs, st)


# -- parsing -------------------------------------------------------------------------

def test_case5_replica_roles():
    c = parse_case(data_path("case5.m"))
    assert c.n_bus == 5 and len(c.lines) == 6
    assert sorted(c.gens.bus.tolist()) == [1, 4]
    assert sorted(c.dgs.bus.tolist()) == [1, 5]
    assert c.storages.bus.tolist() == [3]
    assert c.root == 1


def test_case5_json_matches_matpower():
    a = parse_case(data_path("case5.m"))
    b = parse_case(data_path("case5.json"))
    np.testing.assert_array_equal(a.bus_ids, b.bus_ids)
    for name in ("gens", "dgs", "storages", "lines"):
        ta, tb = getattr(a, name), getattr(b, name)
        for col in ta.columns:
            np.testing.assert_allclose(ta.columns[col], tb.columns[col], err_msg=f"{name}.{col}")
    np.testing.assert_allclose(a.demand, b.demand)


def test_case30_replica_roles():
    c = parse_case(data_path("case30.m"))
    assert sorted(c.gens.bus.tolist()) == [5, 8, 11, 13]
    assert c.dgs.bus.tolist() == [2]
    assert sorted(c.storages.bus.tolist()) == [1, 2, 8, 13]


def test_case_dict_round_trip():
    c = parse_case(data_path("case5.json"))
    back = case_from_dict(json.loads(json.dumps(c.to_dict())))
    np.testing.assert_allclose(back.lines.x, c.lines.x)
    assert back.storages.bus.tolist() == c.storages.bus.tolist()


def test_malformed_matpower(tmp_path):
    text = data_path("case5.m").read_text()
    bad = text.replace("mpc.branch = [", "mpc.branch = [\n\t1\tabc\t0.1;", 1)
    (tmp_path / "bad.m").write_text(bad)
    (tmp_path / "bad.roles.json").write_text(data_path("case5.roles.json").read_text())
    with pytest.raises(ParseError) as exc:
        parse_case(tmp_path / "bad.m")
    assert exc.value.line is not None and exc.value.column is not None


def test_malformed_json(tmp_path):
    (tmp_path / "bad.json").write_text('{"name": "x", "buses": [1, 2,]}')
    with pytest.raises(ParseError) as exc:
        parse_case(tmp_path / "bad.json")
    assert exc.value.line == 1


def test_unknown_role(tmp_path):
    (tmp_path / "c.m").write_text(data_path("case5.m").read_text())
    roles = json.loads(data_path("case5.roles.json").read_text())
    roles["generators"][0]["role"] = "nuclear"
    (tmp_path / "c.roles.json").write_text(json.dumps(roles))
    with pytest.raises(UnknownRole):
        parse_case(tmp_path / "c.m")


def test_missing_case_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_case(tmp_path / "nope.json")


def test_case_invariants():
    c = tiny_case()
    c.validate()
    bad = DeviceTable({**c.lines.columns, "x": np.array([0.0])})
    with pytest.raises(ValueError):
        GridCase("t", 100.0, "", 1, c.bus_ids, c.demand, bad, c.gens, c.dgs,
                 c.storages).validate()


# -- time series ---------------------------------------------------------------------

def test_day24():
    ts = load_timeseries(data_path("day24.csv"), 24)
    assert ts.periods == 24 and ts.dt == 1.0


def test_day96():
    ts = load_timeseries(data_path("day96.csv"), 96)
    assert ts.periods == 96 and ts.dt == 0.25


def test_short_file(tmp_path):
    lines = data_path("day24.csv").read_text().splitlines()
    (tmp_path / "d.csv").write_text("\n".join(lines[:24]) + "\n")
    with pytest.raises(LengthMismatch):
        load_timeseries(tmp_path / "d.csv", 24)


def test_negative_multiplier(tmp_path):
    (tmp_path / "d.csv").write_text("t,p_fl,p_sl,delta_d,delta_dg\n0,10,12,-1,0.5\n")
    with pytest.raises(NegativeMultiplier):
        load_timeseries(tmp_path / "d.csv")


def test_missing_column(tmp_path):
    (tmp_path / "d.csv").write_text("t,p_fl,p_sl,delta_d\n0,10,12,1\n")
    with pytest.raises(ParseError):
        load_timeseries(tmp_path / "d.csv")


def test_bad_cell_position(tmp_path):
    (tmp_path / "d.csv").write_text("t,p_fl,p_sl,delta_d,delta_dg\n0,10,12,1,0.5\n1,x,12,1,1\n")
    with pytest.raises(ParseError) as exc:
        load_timeseries(tmp_path / "d.csv")
    assert (exc.value.line, exc.value.column) == (3, 2)


def test_series_length_check():
    with pytest.raises(LengthMismatch):
        TimeSeries.build([1, 2], [1, 2, 3])


# -- beta bounds and Omega -----------------------------------------------------------

def test_beta_bounds_exact_case():
    bb = beta_bounds_power(tiny_case(), TimeSeries.build([10.0], [16.0]))
    assert bb.lower.tolist() == [14.0] and bb.upper.tolist() == [14.0]
    assert bb.exact


def test_beta_bounds_loose_case():
    bb = beta_bounds_power(tiny_case(), TimeSeries.build([8.0], [10.0]))
    assert bb.lower.tolist() == [8.0] and bb.upper.tolist() == [12.0]
    assert not bb.exact


def test_beta_lower_clipped():
    bb = beta_bounds_power(tiny_case(f_plus=(5.0,), f_minus=(5.0,)), TimeSeries.build([1.0], [1.0]))
    assert bb.lower.tolist() == [0.0]
    assert bb.upper[0] >= bb.lower[0]


def _two_dg_case():
    return tiny_case(f_plus=(2.0, 2.0), f_minus=(3.0, 3.0), p_plus=(5.0, 5.0))


def test_omega_r_zero_vacuous():
    om = build_omega_power(_two_dg_case(), TimeSeries.build([1.0], [2.0]), 0.0,
                           fcast=np.array([[2.0], [3.0]]))
    assert om.contains(np.zeros(2)) and om.contains(np.array([5.0, 5.0]))


def test_omega_half():
    om = build_omega_power(_two_dg_case(), TimeSeries.build([1.0], [2.0]), 0.5,
                           fcast=np.array([[2.0], [3.0]]))
    assert om.contains(np.array([2.5, 0.0]))
    assert not om.contains(np.array([1.0, 1.0]))
    got = {tuple(np.round(v, 9)) for v in enumerate_vertices(om)}
    assert got == {(0.0, 2.5), (2.5, 0.0), (5.0, 0.0), (0.0, 5.0), (5.0, 5.0)}


def test_omega_empty():
    with pytest.raises(EmptyOmega):
        build_omega_power(_two_dg_case(), TimeSeries.build([1.0], [2.0]), 1.0,
                          fcast=np.array([[6.0], [6.0]]))


def test_omega_nests_in_r():
    c = parse_case(data_path("case5.json"))
    ts = load_timeseries(data_path("day24.csv")).head(2)
    oms = [build_omega_power(c, ts, R) for R in (0.0, 0.4, 1.0)]
    for small, big in zip(oms[1:], oms[:-1]):
        for v in enumerate_vertices(small):
            assert big.contains(v, tol=1e-9)
        np.testing.assert_array_equal(small.h_upper, big.h_upper)


def test_forecast_formula():
    c = tiny_case(p_plus=(4.0,), p_min=(1.0,))
    fc = forecast(c, TimeSeries.build([1, 1, 1], [2, 2, 2], delta_dg=[0.5, 1.0, 3.0]))
    np.testing.assert_allclose(fc, [[1.25, 2.5, 4.0]])


# -- instance assembly ---------------------------------------------------------------

@pytest.fixture(scope="module")
def case5_day():
    return parse_case(data_path("case5.json")), load_timeseries(data_path("day24.csv"), 24)


def test_case5_dimensions(case5_day):
    c, ts = case5_day
    inst, lay = build_power_instance(c, ts, return_layout=True)
    assert inst.third.n_bin == 48
    assert lay.n_dg_rows == 48
    assert inst.third.nnz_bh == 48
    assert inst.n_x == 2 * 24 + 24
    bh = inst.third.b_h.tocsr()
    # B_h = -I on the renewable block, zero elsewhere
    np.testing.assert_array_equal(bh[:48].toarray(), -np.eye(48))
    assert bh[48:].nnz == 0
    # B_x entries only outside the renewable block
    assert inst.third.b_x.tocsr()[:48].nnz == 0 and inst.third.b_x.nnz > 0
    assert validate_instance(inst).ok


def test_case5_row_families(case5_day):
    c, ts = case5_day
    _, lay = build_power_instance(c, ts, return_layout=True)
    free = lay.free_row_names
    count = lambda prefix: sum(nm.startswith(prefix) for nm in free)
    assert count("flow[") == 6 * 24
    assert count("theta_ref[") == 24
    assert count("balance[") == 5 * 24 == lay.balance_rows.size
    assert count("mu_excl[") == 24
    # only finite ratings produce thermal rows
    assert count("therm_hi[") == int(np.isfinite(c.lines.s_max).sum()) * 24
    coupled = lay.coupled_row_names
    assert all(nm.startswith("dg_avail[") for nm in coupled[:lay.n_dg_rows])
    assert sum(nm.startswith("intraday") for nm in coupled) == 2 * 24
    assert sum(nm.startswith("reg_link") for nm in coupled) == 2 * 2 * 24


def test_case30_full_storage_binaries():
    c = parse_case(data_path("case30.m"))
    inst = build_power_instance(c, load_timeseries(data_path("day24.csv")))
    assert inst.third.n_bin == 192


def test_params_validation():
    with pytest.raises(ValueError):
        PowerBuildParams(R=1.5)
    with pytest.raises(ValueError):
        PowerBuildParams(penalty_convention="other")


def test_signed_needs_ordered_penalties():
    c = tiny_case(f_plus=(2.0,), f_minus=(3.0,))
    with pytest.raises(ValueError):
        build_power_instance(c, TimeSeries.build([10.0], [12.0]),
                             PowerBuildParams(penalty_convention="signed"))


def test_case5_solution_properties(case5_day):
    c, ts = case5_day
    inst, lay = build_power_instance(c, ts, PowerBuildParams(R=1.0), return_layout=True)
    mip, sl = build_single_level(inst, return_layout=True)
    sol = solve_mip(mip)
    y = sol.primal[sl.y_slice]
    rep = power_solution_report(c, lay, inst, y)
    assert rep["balance_residual"] <= 1e-6
    assert rep["mu_integral"] and rep["mu_excess"] <= 1e-9
    assert rep["gate_violation"] <= 1e-6
    # DC flow rows hold at the returned point
    p = lay.take(y, "p_line")
    th = lay.take(y, "theta")
    idx = {b: k for k, b in enumerate(c.bus_ids.tolist())}
    f = np.array([idx[b] for b in c.lines.columns["from"]])
    t = np.array([idx[b] for b in c.lines.columns["to"]])
    np.testing.assert_allclose(p, (th[f] - th[t]) / c.lines.x[:, None], atol=1e-7)
    np.testing.assert_allclose(th[idx[c.root]], 0.0, atol=1e-9)


def _beta_rows_gap(seed):
    """Relative change of the recourse dual value when the beta rows are added."""
    c = random_grid_case(seed, signed=True)
    ts = random_series(seed, 3, constant_p_sl=len(c.storages) > 0)
    inst, lay = build_power_instance(c, ts, PowerBuildParams(R=0.5, penalty_convention="signed"),
                                     return_layout=True)
    rng = np.random.default_rng(1000 + seed)
    x = solve_lp(inst.first.feasible_set.as_lp(rng.normal(size=inst.n_x))).primal
    om = inst.omega
    h = om.h_lower + rng.uniform(0.3, 1.0, om.dim) * (om.h_upper - om.h_lower)
    if not om.contains(h):
        h = om.h_upper.copy()
    choice = rng.integers(0, 3, (len(c.storages), ts.periods))
    yf = np.concatenate([(choice == 1).ravel(), (choice == 2).ravel()]).astype(float)
    dual, _ = dualize_lp(build_third_level_primal(inst, x, h, yf))
    bb = beta_bounds_power(c, ts)
    cols = [dual.var_names.index(f"coupled[{j}]") for j in range(lay.n_dg_rows)]
    lo, up = dual.lower.copy(), dual.upper.copy()
    lo[cols] = np.maximum(lo[cols], bb.lower)
    up[cols] = np.minimum(up[cols], bb.upper)
    v0 = solve_lp(dual).objective
    v1 = solve_lp(dual.with_bounds(lo, up)).objective
    return abs(v0 - v1) / max(1.0, abs(v0)), v0


@pytest.mark.parametrize("seed", range(10))
def test_beta_rows_do_not_change_recourse_value(seed):
    gap, v0 = _beta_rows_gap(seed)
    assert np.isfinite(v0)
    assert gap <= 1e-6


STORAGE_SEEDS = [s for s in range(40) if len(random_grid_case(s).storages)][:4]


@pytest.mark.parametrize("seed", STORAGE_SEEDS)
def test_storage_never_hurts(seed):
    c = random_grid_case(seed)
    ts = random_series(seed, 3)
    vals = []
    for case in (c.with_storages([]), c):
        mip = build_single_level(build_power_instance(case, ts, PowerBuildParams(R=0.5)))
        vals.append(solve_mip(mip).objective)
    assert vals[1] <= vals[0] + 1e-6
