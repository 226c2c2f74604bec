"""Lloyd-style KMeans under Euclidean, Manhattan (k-medians) and cosine geometry."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .geometry import ClusteringError, check_cosine_rows


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    objective: float
    history: list = field(default_factory=list)
    n_iter: int = 0


def _unit_rows(X):
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def point_costs(X, centers, metric):
    """n x K matrix of per-point cost to each center, in the metric's own objective."""
    if metric == "euclidean":
        return cdist(X, centers, metric="sqeuclidean")
    if metric == "manhattan":
        return cdist(X, centers, metric="cityblock")
    if metric == "cosine":
        # X and centers are unit rows here
        return np.clip(1.0 - X @ centers.T, 0.0, 2.0)
    raise ValueError(f"unknown metric {metric!r}")


def _update_center(block, metric):
    if metric == "euclidean":
        return block.mean(axis=0)
    if metric == "manhattan":
        return np.median(block, axis=0)
    c = block.sum(axis=0)
    norm = np.linalg.norm(c)
    if norm == 0:
        return block[0].copy()
    return c / norm


def kmeans_plusplus(X, K, rng, metric="euclidean"):
    """Seed indices by D-sampling with the metric's cost."""
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    best = point_costs(X, X[chosen], metric)[:, 0]
    for _ in range(1, K):
        total = best.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=best / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free)) if free.size else int(rng.integers(n))
        chosen.append(nxt)
        best = np.minimum(best, point_costs(X, X[[nxt]], metric)[:, 0])
    return np.array(chosen)


def initial_indices(X, K, init, rng, metric="euclidean"):
    if init == "kmeans++":
        return kmeans_plusplus(X, K, rng, metric)
    if init == "random":
        return rng.choice(X.shape[0], size=K, replace=False)
    raise ValueError(f"unknown init {init!r}")


def lloyd(X, init_centers, metric="euclidean", max_iter=500):
    """One Lloyd run from given centers. X must already be unit rows for cosine."""
    centers = np.array(init_centers, dtype=np.float64, copy=True)
    K = centers.shape[0]
    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        costs = point_costs(X, centers, metric)
        new = costs.argmin(axis=1)
        own = costs[np.arange(X.shape[0]), new]
        history.append(float(own.sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        # exact duplicates can flip between tied centers forever
        if labels is not None and history[-1] >= history[-2]:
            break
        labels = new
        taken = set()
        for k in range(K):
            members = labels == k
            if members.any():
                centers[k] = _update_center(X[members], metric)
            else:
                # reseed the empty cluster at the currently worst-served point
                order = np.argsort(-own, kind="stable")
                pick = next((int(i) for i in order if int(i) not in taken), int(order[0]))
                taken.add(pick)
                centers[k] = X[pick]
    return KMeansResult(labels=labels, centers=centers, objective=history[-1],
                        history=history, n_iter=it)


def kmeans(X, K, init="kmeans++", metric="euclidean", n_init=10, max_iter=500, seed=0):
    """Best-of-``n_init`` Lloyd restarts; returns the lowest-objective run."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if K < 1 or K > n:
        raise ClusteringError(f"cannot form K={K} clusters from {n} samples")
    if metric == "cosine":
        check_cosine_rows(X)
        X = _unit_rows(X)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        idx = initial_indices(X, K, init, rng, metric)
        res = lloyd(X, X[idx], metric=metric, max_iter=max_iter)
        if best is None or res.objective < best.objective:
            best = res
    return best
