"""DBSCAN with radius queries on a k-d tree.

Cosine neighbourhoods are answered on unit-normalised rows, where cosine
distance ``1 - cos`` equals half the squared Euclidean distance.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.spatial import cKDTree

from .geometry import check_cosine_rows

NOISE = -1


def _neighbourhoods(X, eps, metric):
    if metric == "euclidean":
        tree = cKDTree(X)
        return tree.query_ball_point(X, r=eps, p=2.0)
    if metric == "manhattan":
        tree = cKDTree(X)
        return tree.query_ball_point(X, r=eps, p=1.0)
    if metric == "cosine":
        check_cosine_rows(X)
        U = X / np.linalg.norm(X, axis=1, keepdims=True)
        tree = cKDTree(U)
        return tree.query_ball_point(U, r=float(np.sqrt(2.0 * max(eps, 0.0))), p=2.0)
    raise ValueError(f"unknown metric {metric!r}")


def dbscan(X, eps, min_samples, metric="euclidean"):
    """Raw DBSCAN labels: clusters 0..C-1 in discovery order, noise = -1.

    ``min_samples`` counts the point itself, as in the common convention.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    hoods = _neighbourhoods(X, eps, metric)
    core = np.fromiter((len(h) >= min_samples for h in hoods), dtype=bool, count=n)
    labels = np.full(n, NOISE, dtype=np.int64)
    current = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = current
        queue = deque([i])
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in hoods[p]:
                if labels[q] == NOISE:
                    labels[q] = current
                    if core[q]:
                        queue.append(q)
        current += 1
    return labels


def noise_as_cluster(labels):
    """Give every noise point one shared extra label after the real clusters."""
    labels = np.asarray(labels).copy()
    noise = labels == NOISE
    if noise.any():
        labels[noise] = labels.max() + 1 if (~noise).any() else 0
    return labels
