"""MAP-DP: maximum a-posteriori clustering under a Dirichlet-process mixture.

Spherical Gaussian clusters with known variance ``sigma2`` and a conjugate
Gaussian prior ``N(mu0, sigma0^2 I)`` on each cluster mean. The cluster means
are integrated out, so the objective is the negative log joint
``-log p(x, z)`` of data and partition under a Chinese-restaurant prior with
concentration ``N0``. Coordinate descent reassigns one point at a time to the
cluster (or a fresh one) with the smallest conditional cost; each move can
only lower the objective, so the iteration terminates at a local optimum.

Features are standardised before clustering (constant columns left as is).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from lvmc.errors import InvalidInputError

_LOG2PI = np.log(2.0 * np.pi)


@dataclass
class ClusterModel:
    """Partition of observed customers.

    ``labels[i]`` is the cluster of profile ``ids[i]``; clusters are numbered
    in order of first appearance so the labelling is canonical.
    """

    ids: list
    labels: np.ndarray
    centroids: np.ndarray
    objective: float

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters)

    @property
    def n_clusters(self) -> int:
        return int(self.centroids.shape[0])

    def members(self, k):
        return [self.ids[i] for i in np.flatnonzero(self.labels == k)]

    def to_dict(self):
        return {
            "ids": list(self.ids),
            "labels": self.labels.tolist(),
            "centroids": self.centroids.tolist(),
            "objective": self.objective,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(list(d["ids"]), np.asarray(d["labels"], dtype=np.int64),
                   np.asarray(d["centroids"], dtype=float), float(d["objective"]))


@dataclass(frozen=True)
class MapDpPrior:
    sigma2: float = 0.25     # within-cluster variance (standardised units)
    sigma0_2: float = 4.0    # prior variance of cluster means
    concentration: float = 1.0


def standardise(x: np.ndarray) -> np.ndarray:
    sd = x.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (x - x.mean(axis=0)) / sd


def _cluster_loglik(n, s, ss, d, prior: MapDpPrior):
    """log marginal likelihood of ``n`` points with sum ``s`` and sum of squares ``ss``.

    Per dimension, x_i = mu + e_i with mu ~ N(0, sigma0^2), e_i ~ N(0, sigma^2).
    """
    if n == 0:
        return 0.0
    s2, s02 = prior.sigma2, prior.sigma0_2
    post = s2 + n * s02
    quad = ss / s2 - s02 * float(np.dot(s, s)) / (s2 * post)
    return -0.5 * (n * d * _LOG2PI + d * (n - 1) * np.log(s2) + d * np.log(post) + quad)


def objective(x: np.ndarray, labels: np.ndarray, prior: MapDpPrior = MapDpPrior()) -> float:
    """Negative log joint ``-log p(x, z)`` for standardised data ``x``."""
    n, d = x.shape
    a = prior.concentration
    ks = np.unique(labels)
    logp = len(ks) * np.log(a) + gammaln(a) - gammaln(a + n)
    for k in ks:
        xk = x[labels == k]
        logp += gammaln(len(xk))
        logp += _cluster_loglik(len(xk), xk.sum(axis=0), float((xk * xk).sum()), d, prior)
    return float(-logp)


def _predictive_cost(xi, n, s, d, prior):
    """-log p(x_i | cluster with ``n`` members summing to ``s``)."""
    s2, s02 = prior.sigma2, prior.sigma0_2
    var_mu = s2 * s02 / (s2 + n * s02)
    mean = s * s02 / (s2 + n * s02)
    var = var_mu + s2
    r = xi - mean
    return 0.5 * (d * (_LOG2PI + np.log(var)) + float(np.dot(r, r)) / var)


def _canonical(labels):
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    return rank[inv].astype(np.int64)


def _descend(x, labels, prior, max_sweeps):
    n, d = x.shape
    a = prior.concentration
    counts = {}
    sums = {}
    for i, k in enumerate(labels):
        counts[k] = counts.get(k, 0) + 1
        sums[k] = sums.get(k, 0.0) + x[i]
    next_label = max(labels) + 1
    for _ in range(max_sweeps):
        moved = False
        for i in range(n):
            k_old = labels[i]
            counts[k_old] -= 1
            sums[k_old] = sums[k_old] - x[i]
            if counts[k_old] == 0:
                del counts[k_old], sums[k_old]
            keys = sorted(counts)
            costs = [_predictive_cost(x[i], counts[k], sums[k], d, prior) - np.log(counts[k]) for k in keys]
            costs.append(_predictive_cost(x[i], 0, np.zeros(d), d, prior) - np.log(a))
            # the fresh-cluster option reuses the old label when i was a singleton
            options = keys + [k_old if k_old not in counts else next_label]
            stay = options.index(k_old)
            j = int(np.argmin(costs))
            if costs[j] >= costs[stay]:
                j = stay  # stay put on ties so the sweep terminates
            k_new = options[j]
            if k_new == next_label:
                next_label += 1
            moved |= k_new != k_old
            labels[i] = k_new
            counts[k_new] = counts.get(k_new, 0) + 1
            sums[k_new] = sums.get(k_new, 0.0) + x[i]
        if not moved:
            break
    return labels


def cluster_customers(
    profiles,
    concentration: float = 1.0,
    seed: int = 0,
    restarts: int = 10,
    prior: MapDpPrior | None = None,
    max_sweeps: int = 100,
) -> ClusterModel:
    """Cluster profiles (or raw feature rows) by MAP-DP, keeping the best of ``restarts``.

    ``profiles`` is a list of objects with ``id`` and ``features`` attributes,
    or a 2-D array of feature rows (ids are then the row indices).
    """
    if isinstance(profiles, np.ndarray):
        feats = np.asarray(profiles, dtype=float)
        ids = [str(i) for i in range(len(feats))]
    else:
        ids = [p.id for p in profiles]
        feats = np.array([np.asarray(p.features, dtype=float) for p in profiles]) if profiles else np.empty((0, 0))
    if feats.ndim != 2 or feats.shape[0] < 2:
        raise InvalidInputError("clustering needs at least 2 profiles with equal-length feature vectors")
    if not np.all(np.isfinite(feats)):
        raise InvalidInputError("feature vectors must be finite")
    if concentration <= 0:
        raise InvalidInputError("concentration must be positive")
    if prior is None:
        prior = MapDpPrior(concentration=concentration)
    else:
        prior = MapDpPrior(prior.sigma2, prior.sigma0_2, concentration)
    x = standardise(feats)
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    best = None
    for r in range(max(1, restarts)):
        # first start: everything in one cluster; later: random partitions
        if r == 0:
            init = np.zeros(n, dtype=np.int64)
        else:
            init = rng.integers(0, rng.integers(1, min(n, 8) + 1), size=n)
        labels = _canonical(_descend(x, list(init), prior, max_sweeps))
        obj = objective(x, labels, prior)
        if best is None or obj < best[1] - 1e-12:
            best = (labels, obj)
    labels, obj = best
    k = labels.max() + 1
    centroids = np.array([feats[labels == j].mean(axis=0) for j in range(k)])
    return ClusterModel(ids, labels, centroids, obj)
