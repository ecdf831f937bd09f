"""Instance JSON and LP text files.

Instance JSON: top-level ``first_level``, ``omega`` and ``third_level`` objects.
Matrices are triplet lists ``[[row, col, value], ...]`` whose shapes follow from
the vector lengths next to them; infinities are the strings ``"inf"``/``"-inf"``.
``omega`` is either standard form (``a_omega``, ``b_omega``, ``slack_rows``,
``h_lower``, ``h_upper``) or ``{"polytope": {...}}`` in inequality form.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ._validation import (SENSE_EQ, SENSE_GE, SENSE_LE, check_matrix, check_vector,
                          encode_float, to_triplets)
from .exceptions import DimensionMismatch, ParseError
from .lpmodel import LpModel
from .model import (FirstLevel, OmegaStandard, Polytope, ThirdLevel, WcaroInstance,
                    standardize_omega)


def _vec(v):
    return [encode_float(t) for t in np.asarray(v, dtype=float)]


def _polytope_to_dict(p: Polytope):
    return {"dim": p.dim, "a_mat": to_triplets(p.a_mat), "senses": [str(s) for s in p.senses],
            "rhs": _vec(p.rhs), "lower": _vec(p.lower), "upper": _vec(p.upper)}


def _polytope_from_dict(d):
    dim = int(d["dim"])
    rhs = check_vector(d.get("rhs", []), name="rhs")
    return Polytope.build(check_matrix(d.get("a_mat", []), (rhs.size, dim), "a_mat", True),
                          d.get("senses"), rhs, d.get("lower"), d.get("upper"), dim=dim)


def instance_to_dict(inst: WcaroInstance):
    fl, om, tl = inst.first, inst.omega, inst.third
    third = {"n_cont": tl.n_cont, "n_bin": tl.n_bin, "n_x": tl.b_x.shape[1], "c": _vec(tl.c),
             "a_free": to_triplets(tl.a_free), "b_free": _vec(tl.b_free),
             "b_coupled": to_triplets(tl.b_coupled), "b_x": to_triplets(tl.b_x),
             "b_h": to_triplets(tl.b_h), "b0": _vec(tl.b0)}
    if tl.free_senses is not None:
        third["free_senses"] = [str(s) for s in tl.free_senses]
    if tl.has_beta_bounds:
        third["beta_lower"] = _vec(tl.beta_lower)
        third["beta_upper"] = _vec(tl.beta_upper)
    return {
        "name": inst.name,
        "first_level": {"n_x": fl.n_x, "feasible_set": _polytope_to_dict(fl.feasible_set),
                        "obj_linear": _vec(fl.obj_linear),
                        "obj_quadratic_diag": _vec(fl.obj_quadratic_diag),
                        "obj_constant": float(fl.obj_constant)},
        "omega": {"a_omega": to_triplets(om.a_omega), "b_omega": _vec(om.b_omega),
                  "slack_rows": [bool(s) for s in om.slack_rows], "h_lower": _vec(om.h_lower),
                  "h_upper": _vec(om.h_upper)},
        "third_level": third,
    }


def instance_from_dict(d) -> WcaroInstance:
    try:
        fd = d["first_level"]
        fs = _polytope_from_dict(fd["feasible_set"])
        fl = FirstLevel.build(fs, fd.get("obj_linear"), fd.get("obj_quadratic_diag"),
                              fd.get("obj_constant", 0.0))
        od = d["omega"]
        if "polytope" in od:
            om = standardize_omega(_polytope_from_dict(od["polytope"]))
        else:
            h_lo = check_vector(od["h_lower"], name="h_lower", allow_inf=True)
            b_om = check_vector(od["b_omega"], name="b_omega")
            om = OmegaStandard(check_matrix(od["a_omega"], (b_om.size, h_lo.size), "a_omega", True),
                               b_om, np.asarray(od["slack_rows"], dtype=bool), h_lo,
                               check_vector(od["h_upper"], h_lo.size, "h_upper", allow_inf=True))
        td = d["third_level"]
        ny = int(td["n_cont"]) + int(td["n_bin"])
        b0 = check_vector(td["b0"], name="b0")
        b_free = check_vector(td.get("b_free", []), name="b_free")
        nj = b0.size
        n_x = int(td.get("n_x", fl.n_x))
        tl = ThirdLevel.build(
            td["n_cont"], td["n_bin"], td["c"],
            check_matrix(td.get("a_free", []), (b_free.size, ny), "a_free", True), b_free,
            check_matrix(td["b_coupled"], (nj, ny), "b_coupled", True),
            check_matrix(td.get("b_x", []), (nj, n_x), "b_x", True),
            check_matrix(td.get("b_h", []), (nj, om.dim), "b_h", True), b0,
            td.get("beta_lower"), td.get("beta_upper"), td.get("free_senses"))
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, DimensionMismatch):
            raise
        raise ParseError(str(exc)) from None
    return WcaroInstance(fl, om, tl, str(d.get("name", "instance")))


def load_instance(path) -> WcaroInstance:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno, exc.colno) from None
    try:
        return instance_from_dict(payload)
    except ParseError as exc:
        raise ParseError(str(exc), str(path)) from None


def save_instance(inst: WcaroInstance, path):
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1), encoding="utf-8")


# -- LP text format ------------------------------------------------------------------

_NAME_FIX = str.maketrans({"[": "(", "]": ")", " ": "_", ":": "_"})
_REL = {SENSE_GE: ">=", SENSE_LE: "<=", SENSE_EQ: "="}


def _lp_name(name, fallback):
    name = (name or fallback).translate(_NAME_FIX)
    if not re.match(r"[A-Za-z_]", name):
        name = "_" + name
    return name


def _num(v):
    return repr(float(v))


def _terms(coefs, names, per_line=6):
    parts = []
    for k, (v, nm) in enumerate(zip(coefs, names)):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_num(abs(v))} {nm}")
    lines = [" ".join(parts[i:i + per_line]) for i in range(0, len(parts), per_line)]
    return "\n   ".join(lines) if lines else "0"


def write_lp(model: LpModel, path, binary_cols=()):
    """Write ``model`` in the CPLEX-style LP text format (readable by common solvers)."""
    if model.has_params:
        raise ValueError("bind model parameters before exporting")
    vnames = [_lp_name(model.var_names[j] if model.var_names else None, f"v{j}")
              for j in range(model.n_vars)]
    rnames = [_lp_name(model.row_names[i] if model.row_names else None, f"r{i}")
              for i in range(model.n_rows)]
    out = ["\\ written by wcaro", "Minimize" if model.sense == "min" else "Maximize"]
    nz = np.flatnonzero(model.obj)
    obj = _terms(model.obj[nz], [vnames[j] for j in nz])
    if model.obj_const:
        obj += f" {'-' if model.obj_const < 0 else '+'} {_num(abs(model.obj_const))}"
    out.append(f" obj: {obj}")
    out.append("Subject To")
    a = sp.csr_matrix(model.a_mat)
    for i in range(model.n_rows):
        sl = slice(a.indptr[i], a.indptr[i + 1])
        lhs = _terms(a.data[sl], [vnames[j] for j in a.indices[sl]])
        out.append(f" {rnames[i]}: {lhs} {_REL[model.senses[i]]} {_num(model.rhs[i])}")
    out.append("Bounds")
    for j in range(model.n_vars):
        lo, up = model.lower[j], model.upper[j]
        if lo == 0 and up == np.inf:
            continue
        if lo == -np.inf and up == np.inf:
            out.append(f" {vnames[j]} free")
        elif lo == up:
            out.append(f" {vnames[j]} = {_num(lo)}")
        else:
            lo_s = "-inf" if lo == -np.inf else _num(lo)
            up_s = "+inf" if up == np.inf else _num(up)
            out.append(f" {lo_s} <= {vnames[j]} <= {up_s}")
    if len(binary_cols):
        out.append("Binaries")
        out.append(" " + " ".join(vnames[j] for j in binary_cols))
    out.append("End")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_lp(text):
    """Parse the subset of the LP format produced by :func:`write_lp`.

    Returns ``(LpModel, binary column indices)``.
    """
    section = None
    sense = "min"
    obj_expr = ""
    rows, bounds, binaries = [], [], []
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        key = line.lower()
        if key in ("minimize", "maximize"):
            section, sense = "obj", key[:3]
            continue
        if key in ("subject to", "bounds", "binaries", "end"):
            section = key
            continue
        if raw.startswith("   ") and current is not None:
            current[1] += " " + line
            continue
        if section == "obj":
            current = ["obj", line.split(":", 1)[1]]
            obj_expr = current
        elif section == "subject to":
            name, body = line.split(":", 1)
            current = [name.strip(), body]
            rows.append(current)
        elif section == "bounds":
            bounds.append(line)
        elif section == "binaries":
            binaries += line.split()
    names = {}

    def parse_expr(expr):
        toks = expr.split()
        coefs, const = {}, 0.0
        if toks == ["0"]:
            return coefs, const
        k = 0
        while k < len(toks):
            sign = -1.0 if toks[k] == "-" else 1.0
            val = float(toks[k + 1])
            if k + 2 < len(toks) and toks[k + 2] not in "+-":
                nm = toks[k + 2]
                names.setdefault(nm, len(names))
                coefs[nm] = coefs.get(nm, 0.0) + sign * val
                k += 3
            else:
                const += sign * val
                k += 2
        return coefs, const

    obj_coefs, obj_const = parse_expr(obj_expr[1] if obj_expr else "")
    parsed = []
    for name, body in rows:
        m = re.match(r"(.*)\s(>=|<=|=)\s(\S+)$", body.strip())
        coefs, _ = parse_expr(m.group(1))
        parsed.append((name, coefs, {">=": SENSE_GE, "<=": SENSE_LE, "=": SENSE_EQ}[m.group(2)],
                       float(m.group(3))))
    for b in bounds:
        for tok in b.replace("<=", " ").replace("=", " ").split():
            if re.match(r"[A-Za-z_]", tok) and tok not in ("free", "inf"):
                names.setdefault(tok, len(names))
    n = len(names)
    obj = np.zeros(n)
    for nm, v in obj_coefs.items():
        obj[names[nm]] = v
    a = np.zeros((len(parsed), n))
    for i, (_, coefs, _, _) in enumerate(parsed):
        for nm, v in coefs.items():
            a[i, names[nm]] = v
    lower, upper = np.zeros(n), np.full(n, np.inf)
    for b in bounds:
        toks = b.split()
        if toks[-1] == "free":
            lower[names[toks[0]]] = -np.inf
        elif len(toks) == 3 and toks[1] == "=":
            lower[names[toks[0]]] = upper[names[toks[0]]] = float(toks[2])
        else:
            j = names[toks[2]]
            lower[j] = float(toks[0])
            upper[j] = float(toks[4])
    inv = sorted(names, key=names.get)
    model = LpModel.build(obj, a, [p[2] for p in parsed], [p[3] for p in parsed], lower, upper,
                          sense=sense, obj_const=obj_const, var_names=inv,
                          row_names=[p[0] for p in parsed])
    return model, np.asarray([names[b] for b in binaries], dtype=int)
