"""Seeded k-means (k-means++ init, Lloyd iterations, best of n restarts)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int
    restart: int
    # inertia after every Lloyd iteration of every restart
    history: list[list[float]] = field(default_factory=list)


def n_clusters_for(n: int) -> int:
    """max(1, min(n, floor(sqrt(n))))."""
    return max(1, min(n, math.isqrt(n)))


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [int(rng.integers(n))]
    closest = _sq_dists(x, x[centers]).min(1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(idx)
        closest = np.minimum(closest, _sq_dists(x, x[[idx]])[:, 0])
    return x[centers].copy()


def _fill_empty(x, labels, centroids, dists, k):
    """Move the point farthest from its centroid into each empty cluster."""
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        own = dists[np.arange(len(labels)), labels].copy()
        # only steal from clusters that keep at least one member
        own[counts[labels] <= 1] = -1.0
        i = int(np.argmax(own))
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] = 1
        centroids[j] = x[i]
        dists[i] = _sq_dists(x[[i]], centroids)[0]
    return labels


def _inertia(x, labels, centroids) -> float:
    diff = x - centroids[labels]
    return float((diff * diff).sum())


def _means(x, labels, k):
    c = np.zeros((k, x.shape[1]))
    np.add.at(c, labels, x)
    return c / np.bincount(labels, minlength=k)[:, None]


def _lloyd(x, centroids, k, max_iter, tol):
    history = []
    labels = None
    prev = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(x, centroids)
        new_labels = d.argmin(1)
        new_labels = _fill_empty(x, new_labels, centroids, d, k)
        centroids = _means(x, new_labels, k)
        inertia = _inertia(x, new_labels, centroids)
        history.append(inertia)
        converged = labels is not None and np.array_equal(new_labels, labels)
        labels = new_labels
        if converged or (math.isfinite(prev) and prev - inertia <= tol * max(prev, 1e-12)):
            break
        prev = inertia
    return labels, centroids, history[-1], it, history


def kmeans(x: np.ndarray, k: int, seed: int = 42, n_init: int = 10, max_iter: int = 300,
           tol: float = 1e-4) -> KMeansResult:
    """Cluster rows of ``x`` into ``k`` groups.

    One generator seeded with ``seed`` feeds all restarts in order; the run with
    the lowest inertia wins, earlier restarts winning ties.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("kmeans needs a non-empty 2-D array")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite value in embeddings")
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    best: KMeansResult | None = None
    histories = []
    for r in range(n_init):
        init = _kmeanspp(x, k, rng)
        labels, centroids, inertia, n_iter, hist = _lloyd(x, init, k, max_iter, tol)
        histories.append(hist)
        if best is None or inertia < best.inertia:
            best = KMeansResult(labels.copy(), centroids, inertia, n_iter, r)
    assert best is not None
    best.history = histories
    return best
