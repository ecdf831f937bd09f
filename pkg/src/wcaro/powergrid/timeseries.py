"""Daily price and multiplier series."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import LengthMismatch, NegativeMultiplier, ParseError

COLUMNS = ("t", "p_fl", "p_sl", "delta_d", "delta_dg")


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Prices ``p_fl``, ``p_sl`` and multipliers ``delta_d``, ``delta_dg`` over one day.

    ``dt`` is the period length in hours.
    """
    p_fl: np.ndarray
    p_sl: np.ndarray
    delta_d: np.ndarray
    delta_dg: np.ndarray
    dt: float

    def __post_init__(self):
        n = self.p_fl.shape[0]
        for name in ("p_sl", "delta_d", "delta_dg"):
            if getattr(self, name).shape[0] != n:
                raise LengthMismatch(f"{name} has length {getattr(self, name).shape[0]}, "
                                     f"expected {n}")
        for name in ("delta_d", "delta_dg"):
            if np.any(getattr(self, name) < 0):
                raise NegativeMultiplier(f"{name} has a negative entry")
        if not (np.all(np.isfinite(self.p_fl)) and np.all(np.isfinite(self.p_sl))):
            raise ValueError("prices must be finite")

    @classmethod
    def build(cls, p_fl, p_sl, delta_d=None, delta_dg=None, dt=None):
        p_fl = np.atleast_1d(np.asarray(p_fl, dtype=float))
        n = p_fl.shape[0]
        ones = np.ones(n)
        return cls(p_fl, np.atleast_1d(np.asarray(p_sl, dtype=float)),
                   ones if delta_d is None else np.atleast_1d(np.asarray(delta_d, dtype=float)),
                   ones if delta_dg is None else np.atleast_1d(np.asarray(delta_dg, dtype=float)),
                   24.0 / n if dt is None else float(dt))

    @property
    def periods(self):
        return self.p_fl.shape[0]

    def head(self, periods):
        """First ``periods`` entries with the period length kept."""
        return TimeSeries(self.p_fl[:periods], self.p_sl[:periods], self.delta_d[:periods],
                          self.delta_dg[:periods], self.dt)


def load_timeseries(path, periods=None) -> TimeSeries:
    """Read a CSV with header ``t,p_fl,p_sl,delta_d,delta_dg``.

    Parameters
    ----------
    path : str or Path
    periods : int, optional
        Expected number of rows; inferred from the file when omitted. The
        period length is ``24 / periods`` hours.

    Raises
    ------
    LengthMismatch
        The file has a different number of rows than ``periods``.
    NegativeMultiplier
        A demand or renewable multiplier is negative.
    ParseError
        Missing columns or non-numeric cells (with line and column).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", str(path), 1, 1) from None
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise ParseError(f"missing column(s) {missing}", str(path), 1, 1)
        pos = [header.index(c) for c in COLUMNS]
        rows = []
        for rec in reader:
            if not rec or all(not c.strip() for c in rec):
                continue
            vals = []
            for c, k in zip(COLUMNS, pos):
                try:
                    vals.append(float(rec[k]))
                except (ValueError, IndexError):
                    raise ParseError(f"bad value in column {c!r}", str(path), reader.line_num,
                                     k + 1) from None
            rows.append(vals)
    data = np.asarray(rows, dtype=float).reshape(-1, len(COLUMNS))
    if periods is None:
        periods = data.shape[0]
    if data.shape[0] != periods:
        raise LengthMismatch(f"{path}: {data.shape[0]} rows, expected {periods}")
    if periods == 0:
        raise LengthMismatch(f"{path}: no data rows")
    if np.any(data[:, 3:] < 0):
        raise NegativeMultiplier(f"{path}: negative multiplier")
    return TimeSeries(data[:, 1], data[:, 2], data[:, 3], data[:, 4], 24.0 / periods)
