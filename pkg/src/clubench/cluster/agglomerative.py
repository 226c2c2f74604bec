"""Agglomerative clustering cut at K clusters.

The merge sequence comes from SciPy's hierarchical linkage (Lance-Williams
recurrences for single, complete and average linkage).
"""

from __future__ import annotations

import numpy as np
from scipy.cluster.hierarchy import cut_tree, linkage
from scipy.spatial.distance import pdist

from .geometry import ClusteringError, check_cosine_rows

_PDIST = {"euclidean": "euclidean", "manhattan": "cityblock", "cosine": "cosine"}


def agglomerative(X, K, metric="euclidean", linkage_method="average"):
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if K < 1 or K > n:
        raise ClusteringError(f"cannot form K={K} clusters from {n} samples")
    if linkage_method not in ("average", "complete", "single"):
        raise ValueError(f"unknown linkage {linkage_method!r}")
    if metric == "cosine":
        check_cosine_rows(X)
    d = pdist(X, metric=_PDIST[metric])
    d = np.clip(d, 0.0, None)
    if K == n:
        return np.arange(n)
    Z = linkage(d, method=linkage_method)
    return cut_tree(Z, n_clusters=K).ravel().astype(np.int64)
