"""Half-hourly trace CSV: ``customer_id, timestamp_iso8601, demand_kw, pv_kw``.

Timestamps are local standard time without daylight-saving shifts. Each
customer's rows must start at midnight and cover whole days; up to two
consecutive missing half-hours (absent rows or empty values) are filled by
linear interpolation, longer gaps are rejected.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging

import numpy as np

from lvmc import SLOTS_PER_DAY
from lvmc.errors import InvalidInputError
from lvmc.io.atomic import atomic_write

log = logging.getLogger(__name__)

COLUMNS = ("customer_id", "timestamp_iso8601", "demand_kw", "pv_kw")
MAX_GAP = 2
_STEP = dt.timedelta(minutes=30)


class TraceParseError(InvalidInputError):
    """Malformed or invalid trace file; ``row`` is the 1-based line number."""

    def __init__(self, message, row=None):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row


def _value(text, row, column):
    text = text.strip()
    if text == "":
        return np.nan
    try:
        v = float(text)
    except ValueError:
        raise TraceParseError(f"{column} {text!r} is not a number", row) from None
    if not np.isfinite(v):
        raise TraceParseError(f"{column} must be finite", row)
    if v < 0:
        raise TraceParseError(f"{column} must be non-negative, got {v}", row)
    return v


def ingest_traces(path, max_gap: int = MAX_GAP):
    """Read and validate a trace CSV into a list of ``CustomerProfile``."""
    from lvmc.synthesis.profiles import CustomerProfile

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceParseError("file is empty", 1) from None
        if tuple(h.strip() for h in header) != COLUMNS:
            raise TraceParseError(f"header must be {','.join(COLUMNS)}, got {','.join(header)}", 1)
        series = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 4:
                raise TraceParseError(f"expected 4 fields, got {len(rec)}", lineno)
            cid = rec[0].strip()
            if not cid:
                raise TraceParseError("customer_id is empty", lineno)
            try:
                ts = dt.datetime.fromisoformat(rec[1].strip())
            except ValueError:
                raise TraceParseError(f"bad timestamp {rec[1]!r}", lineno) from None
            if ts.tzinfo is not None:
                raise TraceParseError("timestamps must be local standard time without offset", lineno)
            if ts.second or ts.microsecond or ts.minute not in (0, 30):
                raise TraceParseError(f"timestamp {rec[1]} is not on a half-hour boundary", lineno)
            d = _value(rec[2], lineno, "demand_kw")
            p = _value(rec[3], lineno, "pv_kw")
            series.setdefault(cid, []).append((ts, d, p, lineno))

    profiles = []
    for cid, rows in series.items():
        rows.sort(key=lambda r: r[0])
        profiles.append(_to_profile(cid, rows, max_gap, CustomerProfile))
    return profiles


def _to_profile(cid, rows, max_gap, cls):
    t0 = rows[0][0]
    if t0.time() != dt.time(0, 0):
        raise TraceParseError(f"customer {cid}: series must start at midnight, starts {t0}", rows[0][3])
    idx = [int((r[0] - t0) / _STEP) for r in rows]
    if len(set(idx)) != len(idx):
        dup = next(r for i, r in enumerate(rows[1:], 1) if idx[i] == idx[i - 1])
        raise TraceParseError(f"customer {cid}: duplicate timestamp {dup[0]}", dup[3])
    n = idx[-1] + 1
    if n % SLOTS_PER_DAY:
        n_full = -(-n // SLOTS_PER_DAY) * SLOTS_PER_DAY
        if n_full - n > max_gap:
            raise TraceParseError(f"customer {cid}: series does not cover whole days", rows[-1][3])
        n = n_full
    demand = np.full(n, np.nan)
    pv = np.full(n, np.nan)
    lines = np.zeros(n, dtype=np.int64)
    for i, r in zip(idx, rows):
        demand[i], pv[i], lines[i] = r[1], r[2], r[3]
    for name, arr in (("demand_kw", demand), ("pv_kw", pv)):
        _fill_gaps(arr, max_gap, cid, name, lines)
    return cls(cid, demand, pv, start=t0.date())


def _fill_gaps(arr, max_gap, cid, name, lines):
    missing = np.isnan(arr)
    if not missing.any():
        return
    edges = np.diff(np.concatenate([[0], missing.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    for a, b in zip(starts, ends):
        near = lines[a - 1] if a > 0 else (lines[b] if b < arr.size else None)
        if b - a > max_gap:
            raise TraceParseError(f"customer {cid}: gap of {b - a} half-hours in {name}", near)
        if a == 0 or b == arr.size:
            # no neighbour on one side: hold the available one
            fill = arr[b] if a == 0 else arr[a - 1]
            arr[a:b] = fill
        else:
            arr[a:b] = np.interp(np.arange(a, b), [a - 1, b], [arr[a - 1], arr[b]])
        log.warning("customer %s: interpolated %d missing %s value(s) near row %s", cid, b - a, name, near)


def traces_csv(profiles) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for p in profiles:
        cid = getattr(p, "id", None)
        start = dt.datetime.combine(getattr(p, "start", dt.date(2013, 1, 1)), dt.time())
        for t, (d, v) in enumerate(zip(p.demand.tolist(), p.pv.tolist())):
            w.writerow([cid, (start + t * _STEP).isoformat(), repr(d), repr(v)])
    return buf.getvalue()


def export_traces(profiles, path):
    """Write profiles (or synthetic traces with ``id``/``start`` set) to the trace CSV."""
    atomic_write(path, traces_csv(profiles))
