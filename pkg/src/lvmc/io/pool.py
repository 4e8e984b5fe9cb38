"""Persisted synthetic pool: a trace CSV plus ``pool_meta.csv`` (id, cluster, PV size)."""

from __future__ import annotations

import csv
import io
import os

import numpy as np

from lvmc.errors import InvalidInputError
from lvmc.io.atomic import atomic_write
from lvmc.io.traces import export_traces, ingest_traces

META_COLUMNS = ("customer_id", "cluster", "pv_kw")


def save_pool(pool, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    export_traces(pool, os.path.join(out_dir, "pool.csv"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(META_COLUMNS)
    for tr in pool:
        w.writerow([tr.id, tr.assigned_cluster, repr(float(tr.pv_kw))])
    atomic_write(os.path.join(out_dir, "pool_meta.csv"), buf.getvalue())


def load_pool(out_dir):
    """Traces written by :func:`save_pool`, in their original order."""
    from lvmc.synthesis.model import NetLoadTrace

    meta_path = os.path.join(out_dir, "pool_meta.csv")
    if not os.path.isfile(meta_path):
        raise InvalidInputError(f"pool metadata not found: {meta_path}")
    profiles = {p.id: p for p in ingest_traces(os.path.join(out_dir, "pool.csv"))}
    out = []
    with open(meta_path, newline="") as fh:
        for rec in csv.DictReader(fh):
            p = profiles.get(rec["customer_id"])
            if p is None:
                raise InvalidInputError(f"pool trace {rec['customer_id']} missing from pool.csv")
            out.append(NetLoadTrace(np.asarray(p.demand), np.asarray(p.pv), int(rec["cluster"]),
                                    float(rec["pv_kw"]), id=p.id, start=p.start))
    return out
