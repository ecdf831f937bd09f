"""Input coercion helpers in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionMismatch

SENSE_GE = ">"
SENSE_LE = "<"
SENSE_EQ = "="

_SENSE_ALIASES = {
    ">": SENSE_GE, ">=": SENSE_GE, "G": SENSE_GE, "ge": SENSE_GE, "≥": SENSE_GE,
    "<": SENSE_LE, "<=": SENSE_LE, "L": SENSE_LE, "le": SENSE_LE, "≤": SENSE_LE,
    "=": SENSE_EQ, "==": SENSE_EQ, "E": SENSE_EQ, "eq": SENSE_EQ,
}


def check_vector(x, n=None, name="vector", fill=None, allow_inf=False):
    """Return ``x`` as a 1-D float array of length ``n``.

    ``None`` is replaced by ``fill`` repeated ``n`` times when ``fill`` is given.
    Strings ``"inf"``/``"-inf"`` are accepted so that JSON payloads round-trip.
    """
    if x is None:
        if fill is None or n is None:
            raise DimensionMismatch(f"{name} is required")
        return np.full(n, float(fill))
    arr = np.asarray([_to_float(v) for v in np.ravel(np.asarray(x, dtype=object))], dtype=float) \
        if _has_strings(x) else np.asarray(x, dtype=float).ravel()
    if n is not None and arr.shape[0] != n:
        raise DimensionMismatch(f"{name} has length {arr.shape[0]}, expected {n}")
    if np.isnan(arr).any():
        raise ValueError(f"{name} contains NaN")
    if not allow_inf and np.isinf(arr).any():
        raise ValueError(f"{name} contains infinite entries")
    return arr


def check_matrix(a, shape=None, name="matrix", triplets=False):
    """Return ``a`` as a CSR matrix, checking its shape.

    Accepts dense arrays and any scipy sparse format. With ``triplets=True`` the
    input is a coordinate list ``[[row, col, value], ...]`` and ``shape`` is
    mandatory.
    """
    if a is None:
        if shape is None:
            raise DimensionMismatch(f"{name} is required")
        return sp.csr_matrix(shape, dtype=float)
    if sp.issparse(a):
        mat = sp.csr_matrix(a, dtype=float)
    elif triplets:
        if shape is None:
            raise DimensionMismatch(f"{name}: triplet input needs an explicit shape")
        trip = np.asarray(a, dtype=float).reshape(-1, 3)
        mat = sp.csr_matrix(
            (trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))), shape=shape)
    else:
        dense = np.asarray(a, dtype=float)
        if dense.size == 0 and shape is not None:
            dense = dense.reshape(shape)
        if dense.ndim != 2:
            raise DimensionMismatch(f"{name} must be two-dimensional")
        mat = sp.csr_matrix(dense)
    if shape is not None and tuple(mat.shape) != tuple(shape):
        raise DimensionMismatch(f"{name} has shape {mat.shape}, expected {tuple(shape)}")
    if mat.nnz and not np.isfinite(mat.data).all():
        raise ValueError(f"{name} contains non-finite coefficients")
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


def check_senses(senses, n, name="senses"):
    if senses is None:
        return np.full(n, SENSE_GE, dtype="<U1")
    out = []
    for s in senses:
        try:
            out.append(_SENSE_ALIASES[str(s)])
        except KeyError:
            raise ValueError(f"{name}: unknown relation {s!r}") from None
    if len(out) != n:
        raise DimensionMismatch(f"{name} has length {len(out)}, expected {n}")
    return np.asarray(out, dtype="<U1")


def to_triplets(mat):
    coo = sp.coo_matrix(mat)
    return [[int(r), int(c), float(v)] for r, c, v in zip(coo.row, coo.col, coo.data)]


def encode_float(v):
    """JSON-safe float: infinities become the strings ``"inf"``/``"-inf"``."""
    v = float(v)
    if np.isposinf(v):
        return "inf"
    if np.isneginf(v):
        return "-inf"
    return v


def _to_float(v):
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return np.inf
        if s in ("-inf", "-infinity"):
            return -np.inf
    return float(v)


def _has_strings(x):
    if isinstance(x, np.ndarray):
        return x.dtype == object or x.dtype.kind in "US"
    if isinstance(x, (list, tuple)):
        return any(isinstance(v, str) for v in x)
    return isinstance(x, str)
