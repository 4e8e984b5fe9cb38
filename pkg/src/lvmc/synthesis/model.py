"""Fitted synthesis model: clusters, per-cluster chains and trace generation."""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass

import numpy as np

from lvmc import SLOTS_PER_DAY
from lvmc.errors import InvalidInputError
from lvmc.io.atomic import atomic_write
from lvmc.synthesis.mapdp import ClusterModel, cluster_customers
from lvmc.synthesis.markov import (
    DEFAULT_STATES,
    TransitionMatrixSet,
    build_transition_matrices,
    equal_width_edges,
    state_values,
    walk_states,
)
from lvmc.timebase import DEFAULT_LATITUDE, DEFAULT_START, clear_sky_shape

SCHEMA_VERSION = 1


@dataclass
class NetLoadTrace:
    demand: np.ndarray
    pv: np.ndarray
    assigned_cluster: int
    pv_kw: float = 0.0
    states: np.ndarray | None = None
    id: str = ""
    start: dt.date = DEFAULT_START

    @property
    def net(self):
        return self.demand - self.pv

    def __len__(self):
        return self.demand.size


def sample_cluster_assignments(counts, m: int, seed=None) -> np.ndarray:
    """Draw ``p ~ Dirichlet(counts)`` once, then ``m`` categorical cluster labels from ``p``."""
    alpha = np.asarray(getattr(counts, "counts", counts), dtype=float)
    if m < 1:
        raise InvalidInputError("m must be at least 1")
    if alpha.ndim != 1 or alpha.size == 0 or np.any(alpha < 1):
        raise InvalidInputError("cluster counts must all be >= 1")
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(alpha)
    return rng.choice(alpha.size, size=m, p=p)


def decompose(net, cap_kw, share, shape) -> tuple[np.ndarray, np.ndarray]:
    """Split net load into demand and PV.

    PV is the exported part of the net load plus ``share * cap_kw`` times the
    clear-sky shape (PV consumed behind the meter); demand = net + PV, so
    both are non-negative and their difference is the net load exactly.
    """
    net = np.asarray(net, dtype=float)
    pv = np.maximum(-net, 0.0) + share * cap_kw * shape[: net.shape[-1]]
    return net + pv, pv


def fit_share(profiles, cap_kw, shape) -> float:
    """Behind-the-meter PV share that reproduces the members' mean PV output."""
    pv_mean = np.mean([p.pv.mean() for p in profiles])
    export_mean = np.mean([np.maximum(p.pv - p.demand, 0.0).mean() for p in profiles])
    denom = cap_kw * shape.mean()
    if denom <= 0:
        return 0.0
    return float(max(pv_mean - export_mean, 0.0) / denom)


@dataclass
class SynthesisModel:
    clusters: ClusterModel
    chains: list          # one TransitionMatrixSet per cluster
    pv_kw: np.ndarray     # per-cluster PV capacity (centroid feature)
    share: np.ndarray     # per-cluster behind-the-meter PV share
    latitude: float = DEFAULT_LATITUDE

    @property
    def start(self) -> dt.date:
        return self.chains[0].start

    @property
    def counts(self):
        return self.clusters.counts

    def shape(self, days):
        return clear_sky_shape(self.start, days, self.latitude)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "clusters": self.clusters.to_dict(),
            "counts": self.counts.tolist(),
            "chains": [c.to_dict() for c in self.chains],
            "pv_kw": self.pv_kw.tolist(),
            "share": self.share.tolist(),
            "latitude": self.latitude,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported model schema version {d.get('schema_version')}")
        return cls(
            ClusterModel.from_dict(d["clusters"]),
            [TransitionMatrixSet.from_dict(c) for c in d["chains"]],
            np.asarray(d["pv_kw"], float),
            np.asarray(d["share"], float),
            float(d["latitude"]),
        )

    def save(self, path):
        atomic_write(path, json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_model(
    profiles,
    n_states: int = DEFAULT_STATES,
    concentration: float = 1.0,
    seed: int = 0,
    restarts: int = 10,
    layered: bool | None = None,
    latitude: float = DEFAULT_LATITUDE,
) -> SynthesisModel:
    """Cluster the observed customers and fit one Markov chain per cluster.

    All clusters share the bin edges of the pooled corpus so their states
    are comparable.
    """
    profiles = list(profiles)
    clusters = cluster_customers(profiles, concentration, seed=seed, restarts=restarts)
    nets = [p.demand - p.pv for p in profiles]
    lo = min(float(v.min()) for v in nets)
    hi = max(float(v.max()) for v in nets)
    edges = equal_width_edges(lo, hi, n_states) if hi > lo or n_states == 1 else None
    days = min(p.days for p in profiles)
    shape = clear_sky_shape(profiles[0].start, days, latitude)
    chains, share = [], []
    for k in range(clusters.n_clusters):
        members = [profiles[i] for i in np.flatnonzero(clusters.labels == k)]
        chains.append(build_transition_matrices(members, n_states, layered=layered, edges=edges)
                      if edges is not None else build_transition_matrices(members, n_states, layered))
        share.append(fit_share(members, clusters.centroids[k, 2], shape))
    return SynthesisModel(clusters, chains, clusters.centroids[:, 2].copy(), np.array(share), latitude)


def synthesize_trace(
    ms: TransitionMatrixSet,
    days: int,
    seed=None,
    pv_kw: float = 0.0,
    share: float = 0.0,
    latitude: float = DEFAULT_LATITUDE,
    cluster: int = 0,
) -> NetLoadTrace:
    """One synthetic trace from a single chain."""
    rng = np.random.default_rng(seed)
    states = walk_states(ms, days, rng)[0]
    net = state_values(states, ms.state_edges, rng)
    demand, pv = decompose(net, pv_kw, share, clear_sky_shape(ms.start, days, latitude))
    return NetLoadTrace(demand, pv, cluster, pv_kw, states, start=ms.start)


def synthesize_pool(model: SynthesisModel, m: int, days: int = 365, seed=0) -> list[NetLoadTrace]:
    """``m`` synthetic traces: Dirichlet-categorical clusters, then chain walks.

    Traces of one cluster are simulated together; the result depends only on
    ``(model, m, days, seed)``.
    """
    root = np.random.SeedSequence(seed)
    assign_seed, walk_seed = root.spawn(2)
    labels = sample_cluster_assignments(model.counts, m, np.random.default_rng(assign_seed))
    shape = model.shape(days)
    out: list = [None] * m
    for k, ss in zip(range(model.clusters.n_clusters), walk_seed.spawn(model.clusters.n_clusters)):
        idx = np.flatnonzero(labels == k)
        if idx.size == 0:
            continue
        rng = np.random.default_rng(ss)
        ms = model.chains[k]
        states = walk_states(ms, days, rng, n_walks=idx.size)
        net = state_values(states, ms.state_edges, rng)
        demand, pv = decompose(net, model.pv_kw[k], model.share[k], shape)
        for j, i in enumerate(idx):
            out[i] = NetLoadTrace(demand[j], pv[j], k, float(model.pv_kw[k]), states[j], f"S{i:05d}", model.start)
    return out


def state_distribution(states, n_states) -> np.ndarray:
    """Per slot-of-day state frequencies, shape ``(48, n_states)``."""
    s = np.asarray(states).reshape(-1, SLOTS_PER_DAY)
    out = np.zeros((SLOTS_PER_DAY, n_states))
    for t in range(SLOTS_PER_DAY):
        out[t] = np.bincount(s[:, t], minlength=n_states)
    return out / out.sum(axis=1, keepdims=True)


def total_variation(p, q) -> np.ndarray:
    return 0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum(axis=-1)
