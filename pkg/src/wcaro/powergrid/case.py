"""Grid case data and parsers.

Two on-disk forms are understood:

* native JSON, already in per-unit power with prices per per-unit hour::

    {"name": "case5", "base_mva": 100, "unit": "$ p.u.", "root": 1,
     "buses": [{"id": 1, "demand": 0.0}, ...],
     "lines": [{"from": 1, "to": 2, "x": 0.0281, "s_max": 4.0}, ...],
     "generators": [{"bus": 1, "p_min": 0, "p_max": 0.4, "c2": 0, "c1": 14, "c0": 0,
                     "reg_up": 0.2, "reg_down": -0.2, "r_plus": 14, "r_minus": 14}],
     "renewables": [{"bus": 5, "p_min": 0, "p_plus": 6.0, "f_plus": 2, "f_minus": 3}],
     "storages": [{"bus": 3, "soc_min": 0.1, "soc_max": 0.9, "capacity": 2.0,
                   "p_ch_min": 0, "p_ch_max": 0.5, "p_dch_min": 0, "p_dch_max": 0.5}]}

  ``s_max`` may be ``null`` for an unconstrained line.

* a matpower-style ``.m`` file (``mpc.baseMVA``, ``mpc.bus``, ``mpc.gen``,
  ``mpc.branch`` and optionally ``mpc.gencost`` with the standard column
  layout, MW units) plus a role sidecar ``<stem>.roles.json`` deciding which
  generator rows are conventional, renewable, storage or switched off.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..exceptions import ParseError, UnknownRole

ROLES = ("conventional", "renewable", "storage", "off")

_GEN_FIELDS = ("bus", "p_min", "p_max", "c2", "c1", "c0", "reg_up", "reg_down", "r_plus",
               "r_minus")
_DG_FIELDS = ("bus", "p_min", "p_plus", "f_plus", "f_minus")
_STORAGE_FIELDS = ("bus", "soc_min", "soc_max", "capacity", "p_ch_min", "p_ch_max",
                   "p_dch_min", "p_dch_max")

STORAGE_DEFAULTS = {"soc_min": 0.1, "soc_max": 0.9, "capacity": 2.0, "p_ch_min": 0.0,
                    "p_ch_max": 0.5, "p_dch_min": 0.0, "p_dch_max": 0.5}
RENEWABLE_DEFAULTS = {"p_min": 0.0, "f_plus": 2.0, "f_minus": 3.0}


@dataclass(frozen=True, eq=False)
class DeviceTable:
    """Column-oriented device parameters; every field is an array of equal length."""
    columns: dict

    def __getattr__(self, name):
        try:
            return self.__dict__["columns"][name]
        except KeyError:
            raise AttributeError(name) from None

    def __len__(self):
        cols = self.columns
        return len(next(iter(cols.values()))) if cols else 0

    def take(self, idx):
        return DeviceTable({k: v[idx] for k, v in self.columns.items()})

    def to_records(self):
        n = len(self)
        out = []
        for i in range(n):
            rec = {}
            for k, v in self.columns.items():
                val = v[i]
                if k in ("bus", "from", "to"):
                    rec[k] = int(val)
                else:
                    rec[k] = None if np.isinf(val) else float(val)
            out.append(rec)
        return out


def _table(records, fields, where):
    cols = {f: [] for f in fields}
    for k, rec in enumerate(records):
        for f in fields:
            if f not in rec:
                raise ParseError(f"{where}[{k}] lacks field {f!r}")
            val = rec[f]
            if f == "s_max" and val is None:
                val = np.inf
            cols[f].append(val)
    out = {}
    for f, vals in cols.items():
        try:
            out[f] = np.asarray(vals, dtype=int if f in ("bus", "from", "to") else float)
        except (TypeError, ValueError):
            raise ParseError(f"{where}: non-numeric value in field {f!r}") from None
    return DeviceTable(out)


@dataclass(frozen=True, eq=False)
class GridCase:
    """Network, devices and demand of one grid, powers in p.u. of ``base_mva``."""
    name: str
    base_mva: float
    unit: str
    root: int
    bus_ids: np.ndarray
    demand: np.ndarray
    lines: DeviceTable
    gens: DeviceTable
    dgs: DeviceTable
    storages: DeviceTable

    def __post_init__(self):
        self.validate()

    @property
    def n_bus(self):
        return self.bus_ids.shape[0]

    @property
    def n_lines(self):
        return len(self.lines)

    def bus_index(self, ids):
        pos = {int(b): k for k, b in enumerate(self.bus_ids)}
        try:
            return np.asarray([pos[int(b)] for b in np.atleast_1d(ids)], dtype=int)
        except KeyError as exc:
            raise ValueError(f"unknown bus id {exc.args[0]}") from None

    def validate(self):
        if len(set(self.bus_ids.tolist())) != self.n_bus:
            raise ValueError("duplicate bus ids")
        self.bus_index([self.root])
        for tab in (self.gens, self.dgs, self.storages):
            if len(tab):
                self.bus_index(tab.bus)
        if self.n_lines:
            self.bus_index(self.lines.columns["from"])
            self.bus_index(self.lines.to)
            if np.any(self.lines.x <= 0):
                raise ValueError("line reactance must be positive")
        if len(self.gens) and np.any(self.gens.p_min > self.gens.p_max):
            raise ValueError("generator p_min exceeds p_max")
        if len(self.gens) and (np.any(self.gens.reg_up < 0) or np.any(self.gens.reg_down > 0)):
            raise ValueError("regulation limits need reg_up >= 0 >= reg_down")
        if len(self.storages):
            st = self.storages
            if np.any(st.soc_min > st.soc_max):
                raise ValueError("storage soc_min exceeds soc_max")
            if np.any(st.capacity <= 0):
                raise ValueError("storage capacity must be positive")
        prices = [self.gens.columns.get(k, np.zeros(0)) for k in ("c1", "c2", "c0", "r_plus",
                                                               "r_minus")]
        prices += [self.dgs.columns.get(k, np.zeros(0)) for k in ("f_plus", "f_minus")]
        if not all(np.all(np.isfinite(p)) for p in prices):
            raise ValueError("all prices must be finite")

    def with_storages(self, buses):
        """Keep only the storages located at ``buses`` (in the stored order)."""
        keep = np.flatnonzero(np.isin(self.storages.bus, np.asarray(list(buses), dtype=int)))
        return replace(self, storages=self.storages.take(keep))

    def with_gen_prices(self, bus, r_plus, r_minus=None):
        """Copy with the regulation prices of the generators at ``bus`` replaced."""
        cols = dict(self.gens.columns)
        mask = cols["bus"] == int(bus)
        cols["r_plus"] = np.where(mask, float(r_plus), cols["r_plus"])
        cols["r_minus"] = np.where(mask, float(r_plus if r_minus is None else r_minus),
                                   cols["r_minus"])
        return replace(self, gens=DeviceTable(cols))

    def to_dict(self):
        lines = self.lines.to_records()
        return {"name": self.name, "base_mva": self.base_mva, "unit": self.unit,
                "root": int(self.root),
                "buses": [{"id": int(b), "demand": float(d)}
                          for b, d in zip(self.bus_ids, self.demand)],
                "lines": lines, "generators": self.gens.to_records(),
                "renewables": self.dgs.to_records(), "storages": self.storages.to_records()}


def case_from_dict(d, name=None) -> GridCase:
    try:
        buses = d["buses"]
        bus_ids = np.asarray([int(b["id"]) for b in buses], dtype=int)
        demand = np.asarray([float(b.get("demand", 0.0)) for b in buses])
        lines = _table(d.get("lines", []), ("from", "to", "x", "s_max"), "lines")
        gens = _table(d.get("generators", []), _GEN_FIELDS, "generators")
        dgs = _table(d.get("renewables", []), _DG_FIELDS, "renewables")
        storages = _table(d.get("storages", []), _STORAGE_FIELDS, "storages")
        return GridCase(str(d.get("name", name or "case")), float(d.get("base_mva", 100.0)),
                        str(d.get("unit", "$ p.u.")), int(d["root"]), bus_ids, demand, lines,
                        gens, dgs, storages)
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc)) from None


def parse_case(path, roles=None) -> GridCase:
    """Read a native JSON case or a matpower-style ``.m`` file with its role sidecar.

    Parameters
    ----------
    path : str or Path
        Case file. ``.m`` files use the matpower table layout.
    roles : str, Path or dict, optional
        Role map for ``.m`` files; defaults to ``<stem>.roles.json`` next to the case.

    Raises
    ------
    ParseError
        Malformed content, with line and column when known.
    UnknownRole
        A role map entry names a role outside ``ROLES``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".m":
        if roles is None:
            side = path.with_name(path.stem + ".roles.json")
            roles = _load_json(side) if side.exists() else {}
        elif not isinstance(roles, dict):
            roles = _load_json(Path(roles))
        try:
            return case_from_matpower(text, roles, name=path.stem)
        except ParseError as exc:
            if exc.path is None:
                raise type(exc)(str(exc), str(path), exc.line, exc.column) from None
            raise
    try:
        return case_from_dict(_parse_json_text(text, path), name=path.stem)
    except ParseError as exc:
        if exc.path is None:
            raise type(exc)(str(exc), str(path)) from None
        raise


def _parse_json_text(text, path):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno, exc.colno) from None


def _load_json(path):
    return _parse_json_text(Path(path).read_text(encoding="utf-8"), path)


# -- matpower subset -----------------------------------------------------------------

_MIN_COLS = {"bus": 13, "gen": 10, "branch": 11, "gencost": 5}
_ASSIGN = re.compile(r"mpc\.(\w+)\s*=\s*")


def read_matpower_tables(text):
    """Return ``(scalars, tables)`` from matpower text; tables are float arrays."""
    scalars, tables = {}, {}
    lines = text.splitlines()
    k = 0
    while k < len(lines):
        raw = lines[k].split("%", 1)[0]
        m = _ASSIGN.search(raw)
        if not m:
            if raw.strip() and not raw.strip().startswith("function"):
                col = len(raw) - len(raw.lstrip()) + 1
                raise ParseError(f"unexpected content {raw.strip()[:20]!r}", line=k + 1,
                                 column=col)
            k += 1
            continue
        key, rest, col0 = m.group(1), raw[m.end():], m.end()
        if not rest.lstrip().startswith("["):
            val = rest.strip().rstrip(";").strip()
            if val.startswith("'"):
                scalars[key] = val.strip("'")
            else:
                try:
                    scalars[key] = float(val)
                except ValueError:
                    raise ParseError(f"bad scalar {val!r}", line=k + 1, column=col0 + 1) from None
            k += 1
            continue
        col0 += rest.index("[") + 1
        rest = rest[rest.index("[") + 1:]
        rows, closed = [], False
        while True:
            body = rest
            if "]" in body:
                body, closed = body.split("]", 1)[0], True
            for chunk in body.split(";"):
                toks = [(t.group(), t.start()) for t in re.finditer(r"[^\s,]+", chunk)]
                if not toks:
                    continue
                vals = []
                for tok, pos in toks:
                    try:
                        vals.append(float(tok))
                    except ValueError:
                        offset = body.find(chunk) + pos
                        raise ParseError(f"non-numeric entry {tok!r} in mpc.{key}", line=k + 1,
                                         column=col0 + offset + 1) from None
                rows.append((vals, k + 1))
            if closed:
                break
            k += 1
            if k >= len(lines):
                raise ParseError(f"unterminated matrix mpc.{key}", line=k, column=1)
            rest, col0 = lines[k].split("%", 1)[0], 0
        k += 1
        if rows:
            width = len(rows[0][0])
            for vals, ln in rows:
                if len(vals) != width:
                    raise ParseError(f"ragged row in mpc.{key}", line=ln, column=1)
            need = _MIN_COLS.get(key, 0)
            if width < need:
                raise ParseError(f"mpc.{key} needs at least {need} columns, found {width}",
                                 line=rows[0][1], column=1)
        tables[key] = np.asarray([r[0] for r in rows], dtype=float)
    return scalars, tables


def case_from_matpower(text, roles, name="case") -> GridCase:
    """Build a :class:`GridCase` from matpower tables and a role map.

    The role map holds ``root`` (default: the reference bus), ``unit``,
    ``default_role`` (default ``"conventional"``), ``generators`` (a list of
    ``{"row": k, "role": ..., <overrides>}`` with 1-based row numbers),
    ``storages`` (extra storages placed at buses) and per-role ``defaults``.
    Powers are divided by ``baseMVA``; cost coefficients are taken as printed.
    """
    scalars, tables = read_matpower_tables(text)
    for key in ("bus", "gen", "branch"):
        if key not in tables:
            raise ParseError(f"missing table mpc.{key}")
    base = float(scalars.get("baseMVA", 100.0))
    bus, gen, branch = tables["bus"], tables["gen"], tables["branch"]
    gencost = tables.get("gencost")
    bus_ids = bus[:, 0].astype(int)
    demand = bus[:, 2] / base

    live = branch[:, 10] > 0
    br = branch[live]
    s_max = np.where(br[:, 5] > 0, br[:, 5] / base, np.inf)
    lines = DeviceTable({"from": br[:, 0].astype(int), "to": br[:, 1].astype(int),
                         "x": br[:, 3].copy(), "s_max": s_max})

    defaults = roles.get("defaults", {})
    default_role = roles.get("default_role", "conventional")
    entries = {}
    for ent in roles.get("generators", []):
        row = int(ent["row"])
        if not 1 <= row <= gen.shape[0]:
            raise ParseError(f"role map refers to generator row {row}, "
                             f"case has {gen.shape[0]}")
        entries[row] = ent
    gens, dgs, storages = [], [], []
    for k in range(gen.shape[0]):
        ent = entries.get(k + 1, {})
        role = ent.get("role", default_role)
        if role not in ROLES:
            raise UnknownRole(f"unknown role {role!r} for generator row {k + 1}")
        if role == "off" or (gen[k, 7] <= 0 and "role" not in ent):
            continue
        b = int(gen[k, 0])
        p_max, p_min = gen[k, 8] / base, gen[k, 9] / base
        if role == "conventional":
            c2, c1, c0 = _poly_cost(gencost, k)
            rec = {"bus": b, "p_min": p_min, "p_max": p_max, "c2": c2, "c1": c1, "c0": c0,
                   "reg_up": 0.5 * p_max, "reg_down": -0.5 * p_max, "r_plus": c1,
                   "r_minus": c1}
            rec.update(defaults.get("conventional", {}))
        elif role == "renewable":
            rec = {"bus": b, "p_plus": p_max, **RENEWABLE_DEFAULTS}
            rec.update(defaults.get("renewable", {}))
        else:
            rec = {"bus": b, **STORAGE_DEFAULTS}
            rec.update(defaults.get("storage", {}))
        rec.update({kk: v for kk, v in ent.items() if kk not in ("row", "role")})
        if role == "conventional" and "r_plus" in ent and "r_minus" not in ent:
            rec["r_minus"] = ent["r_plus"]
        {"conventional": gens, "renewable": dgs, "storage": storages}[role].append(rec)
    for ent in roles.get("storages", []):
        rec = {**STORAGE_DEFAULTS, **defaults.get("storage", {}), **ent}
        storages.append(rec)
    storages.sort(key=lambda r: int(r["bus"]))
    root = roles.get("root")
    if root is None:
        ref = np.flatnonzero(bus[:, 1] == 3)
        root = int(bus_ids[ref[0]]) if ref.size else int(bus_ids[0])
    for ent_list, tag in ((gens, "conventional"), (dgs, "renewable"), (storages, "storage")):
        for rec in ent_list:
            bad = set(rec) - set({"conventional": _GEN_FIELDS, "renewable": _DG_FIELDS,
                                  "storage": _STORAGE_FIELDS}[tag])
            if bad:
                raise ParseError(f"unknown {tag} field(s) {sorted(bad)} in role map")
    try:
        return GridCase(str(scalars.get("name", name)), base, str(roles.get("unit", "$ p.u.")),
                        int(root), bus_ids, demand, lines,
                        _table(gens, _GEN_FIELDS, "generators"),
                        _table(dgs, _DG_FIELDS, "renewables"),
                        _table(storages, _STORAGE_FIELDS, "storages"))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _poly_cost(gencost, k):
    if gencost is None or k >= gencost.shape[0]:
        return 0.0, 0.0, 0.0
    row = gencost[k]
    if int(row[0]) != 2:
        raise ParseError(f"gencost row {k + 1}: only polynomial (model 2) costs are supported")
    n = int(row[3])
    coefs = list(row[4:4 + n])[::-1] + [0.0, 0.0, 0.0]  # ascending order
    if n > 3:
        raise ParseError(f"gencost row {k + 1}: polynomial degree above 2")
    return float(coefs[2]), float(coefs[1]), float(coefs[0])
