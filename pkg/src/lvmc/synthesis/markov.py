"""Time-inhomogeneous Markov chains over binned net load.

A day has 48 half-hour slots; ``matrices[layer, t]`` moves the chain from
slot ``t`` to slot ``t + 1`` (slot 47 wraps to slot 0 of the next day).
Layers split the year by season and day type when there is enough data.
Rows are Gaussian-kernel smoothed over state indices so every transition
has positive probability.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from lvmc import SLOTS_PER_DAY
from lvmc.errors import DegenerateInputError, InvalidInputError
from lvmc.timebase import DEFAULT_START, N_LAYERS, day_layers

DEFAULT_STATES = 40
MIN_BANDWIDTH = 0.5
# minimum customer-days per layer before seasonal layering is used
MIN_LAYER_DAYS = 20
# uniform floor mixed into smoothed rows so far tails survive underflow
_FLOOR = 1e-13


def silverman_bandwidth(counts) -> float:
    """Silverman's rule on state indices weighted by ``counts``, floored at 0.5."""
    c = np.asarray(counts, dtype=float)
    n = c.sum()
    if n <= 1:
        return MIN_BANDWIDTH
    idx = np.arange(c.size, dtype=float)
    mean = (c * idx).sum() / n
    sd = np.sqrt((c * (idx - mean) ** 2).sum() / (n - 1))
    cdf = np.cumsum(c) / n
    q1 = idx[np.searchsorted(cdf, 0.25)]
    q3 = idx[np.searchsorted(cdf, 0.75)]
    spread = min(sd, (q3 - q1) / 1.34) if q3 > q1 else sd
    return float(max(0.9 * spread * n ** -0.2, MIN_BANDWIDTH))


def kernel_sum(counts, bandwidth) -> np.ndarray:
    """Gaussian kernel sum over state indices (no floor).

    Each state's count is spread by a kernel renormalised over the finite
    range of states, so every observation keeps its full weight and edge
    states are not depleted.
    """
    c = np.asarray(counts, dtype=float)
    idx = np.arange(c.size, dtype=float)
    w = np.exp(-0.5 * ((idx[:, None] - idx[None, :]) / bandwidth) ** 2)
    dens = (w / w.sum(axis=0)) @ c
    return dens / dens.sum()


def smooth_row(row, bandwidth="silverman") -> np.ndarray:
    """Strictly positive probability vector from a row of transition counts.

    All-zero rows give the uniform distribution. ``bandwidth`` is either
    ``"silverman"`` or a positive number of state widths.
    """
    c = np.asarray(row, dtype=float)
    if c.ndim != 1 or c.size == 0 or np.any(c < 0) or not np.all(np.isfinite(c)):
        raise InvalidInputError("a frequency row must be a non-empty vector of non-negative counts")
    n = c.size
    if c.sum() == 0:
        return np.full(n, 1.0 / n)
    h = silverman_bandwidth(c) if bandwidth == "silverman" else float(bandwidth)
    if not h > 0:
        raise InvalidInputError(f"bandwidth must be positive, got {bandwidth}")
    p = (1.0 - _FLOOR) * kernel_sum(c, h) + _FLOOR / n
    return p / p.sum()


@dataclass
class TransitionMatrixSet:
    """Net-load bins and per-slot transition matrices.

    ``counts`` and ``matrices`` have shape ``(layers, 48, n, n)``; ``counts``
    holds the raw observed transitions, ``matrices`` the smoothed rows.
    With a single layer the same matrices serve every day.
    """

    state_edges: np.ndarray
    counts: np.ndarray
    matrices: np.ndarray
    start: dt.date = DEFAULT_START

    @property
    def n_states(self) -> int:
        return self.state_edges.size - 1

    @property
    def n_layers(self) -> int:
        return self.matrices.shape[0]

    def layer_for_days(self, days: int) -> np.ndarray:
        if self.n_layers == 1:
            return np.zeros(days, dtype=np.int64)
        return day_layers(self.start, days)

    def to_dict(self):
        return {
            "state_edges": self.state_edges.tolist(),
            "counts": self.counts.astype(np.int64).tolist(),
            "start": self.start.isoformat(),
        }

    @classmethod
    def from_dict(cls, d, bandwidth="silverman"):
        counts = np.asarray(d["counts"], dtype=float)
        return cls(np.asarray(d["state_edges"], dtype=float), counts,
                   smooth_counts(counts, bandwidth), dt.date.fromisoformat(d["start"]))


def smooth_counts(counts, bandwidth="silverman") -> np.ndarray:
    """Smooth every row of a ``(..., n, n)`` count array.

    A row with no observations borrows the matrix's next-state marginal
    (column sums) before smoothing, so a rarely visited state hands the
    walk back to the states actually seen at that slot instead of
    scattering it uniformly. Only a matrix with no observations at all
    falls back to uniform rows.
    """
    flat = counts.reshape(-1, *counts.shape[-2:])
    out = np.empty_like(flat, dtype=float)
    for m, mat in enumerate(flat):
        marginal = mat.sum(axis=0)
        fallback = smooth_row(marginal, bandwidth)
        for i, row in enumerate(mat):
            out[m, i] = smooth_row(row, bandwidth) if row.any() else fallback
    return out.reshape(counts.shape)


def equal_width_edges(lo, hi, n_states):
    return np.linspace(lo, hi, n_states + 1)


def digitize(values, edges) -> np.ndarray:
    """State index of each value; the top edge belongs to the last bin."""
    return np.clip(np.searchsorted(edges, values, side="right") - 1, 0, edges.size - 2)


def build_transition_matrices(
    profiles,
    n_states: int = DEFAULT_STATES,
    layered: bool | None = None,
    bandwidth="silverman",
    edges=None,
) -> TransitionMatrixSet:
    """Count and smooth slot-to-slot transitions of the profiles' net load.

    ``layered=None`` picks season x day-type layers when the data cover at
    least a year and every layer has ``MIN_LAYER_DAYS`` customer-days.
    ``edges`` overrides the bins (otherwise equal-width over the pooled range).
    """
    if n_states < 1:
        raise InvalidInputError("n_states must be positive")
    profiles = list(profiles)
    if not profiles:
        raise InvalidInputError("at least one profile is required")
    nets = [np.asarray(p.demand, float) - np.asarray(p.pv, float) for p in profiles]
    start = profiles[0].start
    if edges is None:
        lo = min(float(v.min()) for v in nets)
        hi = max(float(v.max()) for v in nets)
        if hi <= lo and n_states > 1:
            raise DegenerateInputError(
                f"net load is constant ({lo} kW); use n_states=1 for a constant chain"
            )
        edges = equal_width_edges(lo, hi, n_states)
    edges = np.asarray(edges, dtype=float)
    n_states = edges.size - 1
    days = [v.size // SLOTS_PER_DAY for v in nets]
    if layered is None:
        layered = min(days) >= 365 and _layer_days(start, days).min() >= MIN_LAYER_DAYS
    n_layers = N_LAYERS if layered else 1
    counts = np.zeros((n_layers, SLOTS_PER_DAY, n_states, n_states))
    for v, nd in zip(nets, days):
        s = digitize(v, edges)
        layer = day_layers(start, nd) if layered else np.zeros(nd, dtype=np.int64)
        step = np.arange(s.size - 1)
        lay = layer[step // SLOTS_PER_DAY]
        np.add.at(counts, (lay, step % SLOTS_PER_DAY, s[:-1], s[1:]), 1.0)
    return TransitionMatrixSet(edges, counts, smooth_counts(counts, bandwidth), start)


def _layer_days(start, days):
    tally = np.zeros(N_LAYERS, dtype=np.int64)
    for nd in days:
        tally += np.bincount(day_layers(start, nd), minlength=N_LAYERS)
    return tally


def initial_distribution(ms: TransitionMatrixSet, layer: int = 0, bandwidth="silverman") -> np.ndarray:
    """Smoothed distribution of the state at slot 0 (row sums of the first matrix)."""
    return smooth_row(ms.counts[layer, 0].sum(axis=1), bandwidth)


def sample_initial_state(ms: TransitionMatrixSet, seed=None, layer: int = 0, bandwidth="silverman") -> int:
    rng = np.random.default_rng(seed)
    return int(rng.choice(ms.n_states, p=initial_distribution(ms, layer, bandwidth)))


def walk_states(ms: TransitionMatrixSet, days: int, rng, n_walks: int = 1, layers=None) -> np.ndarray:
    """Simulate ``n_walks`` independent chains for ``days`` days; shape ``(n_walks, days*48)``."""
    if days < 1:
        raise InvalidInputError("days must be at least 1")
    if layers is None:
        layers = ms.layer_for_days(days)
    T = days * SLOTS_PER_DAY
    n = ms.n_states
    states = np.empty((n_walks, T), dtype=np.int64)
    p0 = initial_distribution(ms, int(layers[0]))
    states[:, 0] = np.minimum(np.searchsorted(np.cumsum(p0), rng.random(n_walks), side="right"), n - 1)
    cum = np.cumsum(ms.matrices, axis=-1)
    u = rng.random((n_walks, T - 1))
    for t in range(T - 1):
        rows = cum[layers[t // SLOTS_PER_DAY], t % SLOTS_PER_DAY][states[:, t]]
        states[:, t + 1] = np.minimum((rows < u[:, t, None]).sum(axis=1), n - 1)
    return states


def state_values(states, edges, rng) -> np.ndarray:
    """Net load drawn uniformly within each state's bin (midpoint for a single bin)."""
    lo = edges[states]
    hi = edges[states + 1]
    if edges.size == 2:
        return 0.5 * (lo + hi)
    return lo + (hi - lo) * rng.random(states.shape)
